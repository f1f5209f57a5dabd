#pragma once

#include <algorithm>
#include <array>
#include <string>
#include <vector>

#include "brinkavg/common.hpp"

namespace brinkavg {

enum class BasisKind { scalar_sine_1d, scalar_sine_2d, divfree_fourier_2d };

inline std::string to_string(BasisKind kind) {
  switch (kind) {
    case BasisKind::scalar_sine_1d: return "scalar_sine_1d";
    case BasisKind::scalar_sine_2d: return "scalar_sine_2d";
    case BasisKind::divfree_fourier_2d: return "divfree_fourier_2d";
  }
  return "unknown";
}

inline BasisKind basis_kind_from_string(const std::string& s) {
  if (s == "scalar_sine_1d") return BasisKind::scalar_sine_1d;
  if (s == "scalar_sine_2d") return BasisKind::scalar_sine_2d;
  if (s == "divfree_fourier_2d") return BasisKind::divfree_fourier_2d;
  throw std::invalid_argument("unknown basis kind: " + s);
}

/// Grid samples of a (possibly vector-valued) field: rows are grid points,
/// columns are components.
using GridField = Matrix;

enum class Parity { sine, cosine };

struct Mode {
  std::array<int, 2> wave{0, 0};  // unused trailing entries are zero
  Parity parity = Parity::sine;
  double stiffness = 0.0;         // lambda_k
  std::array<double, 2> direction{1.0, 0.0};  // divfree only: k_perp / |k|

  double wave_norm() const {
    return std::sqrt(static_cast<double>(wave[0] * wave[0] + wave[1] * wave[1]));
  }
};

/// Orthonormal Galerkin basis on D = (0,1)^d with a uniform midpoint grid.
///
/// Scalar sine modes are the Dirichlet Laplacian eigenfunctions
/// prod_d sqrt(2) sin(k_d pi x_d). Divergence-free modes are the periodic
/// fields sqrt(2) k_perp/|k| {cos, sin}(2 pi k.x) over a half-plane of wave
/// vectors, so that +k and -k are not counted twice.
///
/// Immutable after construction.
class GalerkinBasis {
 public:
  GalerkinBasis(BasisKind kind, std::size_t n_per_dim, std::size_t grid_points_per_dim)
      : kind_(kind), n_per_dim_(n_per_dim), grid_n_(grid_points_per_dim) {
    detail::require(n_per_dim >= 1, "build_basis: n_per_dim must be positive");
    const std::size_t floor =
        kind == BasisKind::divfree_fourier_2d ? 2 * n_per_dim + 1 : 2 * n_per_dim;
    detail::require(grid_points_per_dim >= floor,
                    detail::concat("build_basis: grid_points_per_dim=", grid_points_per_dim,
                                   " below anti-aliasing floor ", floor));
    build_modes();
    build_grid();
    build_tables();
  }

  BasisKind kind() const { return kind_; }
  std::size_t dim() const { return kind_ == BasisKind::scalar_sine_1d ? 1 : 2; }
  std::size_t components() const { return kind_ == BasisKind::divfree_fourier_2d ? 2 : 1; }
  std::size_t n_per_dim() const { return n_per_dim_; }
  std::size_t grid_points_per_dim() const { return grid_n_; }
  std::size_t n_modes() const { return modes_.size(); }
  std::size_t n_points() const { return static_cast<std::size_t>(points_.rows()); }
  const std::vector<Mode>& modes() const { return modes_; }
  const Mode& mode(std::size_t k) const { return modes_.at(k); }

  /// Grid point coordinates, n_points x dim.
  const Matrix& points() const { return points_; }
  /// Uniform quadrature weight of each grid point.
  double weight() const { return weight_; }
  /// Grid spacing per dimension.
  double spacing() const { return 1.0 / static_cast<double>(grid_n_); }

  /// Mode values for one component, n_points x n_modes.
  const Matrix& table(std::size_t component = 0) const { return tables_.at(component); }

  Vector stiffness() const {
    Vector s(static_cast<Eigen::Index>(modes_.size()));
    for (std::size_t k = 0; k < modes_.size(); ++k) s(static_cast<Eigen::Index>(k)) = modes_[k].stiffness;
    return s;
  }

  /// Analytic value of component `c` of mode `k` at x.
  double value(std::size_t k, std::size_t c, const double* x) const {
    const Mode& m = modes_.at(k);
    switch (kind_) {
      case BasisKind::scalar_sine_1d:
        return std::sqrt(2.0) * std::sin(m.wave[0] * pi * x[0]);
      case BasisKind::scalar_sine_2d:
        return 2.0 * std::sin(m.wave[0] * pi * x[0]) * std::sin(m.wave[1] * pi * x[1]);
      case BasisKind::divfree_fourier_2d: {
        double phase = 2.0 * pi * (m.wave[0] * x[0] + m.wave[1] * x[1]);
        double s = m.parity == Parity::cosine ? std::cos(phase) : std::sin(phase);
        return std::sqrt(2.0) * m.direction[c] * s;
      }
    }
    return 0.0;
  }

  /// Analytic partial derivative d/dx_axis of component `c` of mode `k`.
  double derivative(std::size_t k, std::size_t c, std::size_t axis, const double* x) const {
    const Mode& m = modes_.at(k);
    switch (kind_) {
      case BasisKind::scalar_sine_1d:
        return std::sqrt(2.0) * m.wave[0] * pi * std::cos(m.wave[0] * pi * x[0]);
      case BasisKind::scalar_sine_2d: {
        double kx = m.wave[0] * pi, ky = m.wave[1] * pi;
        return axis == 0 ? 2.0 * kx * std::cos(kx * x[0]) * std::sin(ky * x[1])
                         : 2.0 * ky * std::sin(kx * x[0]) * std::cos(ky * x[1]);
      }
      case BasisKind::divfree_fourier_2d: {
        double phase = 2.0 * pi * (m.wave[0] * x[0] + m.wave[1] * x[1]);
        double dphase = 2.0 * pi * m.wave[axis];
        double ds = m.parity == Parity::cosine ? -std::sin(phase) : std::cos(phase);
        return std::sqrt(2.0) * m.direction[c] * dphase * ds;
      }
    }
    return 0.0;
  }

  /// Discrete L2 projection onto the span: c_k = sum_x w <field(x), e_k(x)>.
  Vector project(const GridField& field) const {
    detail::require(static_cast<std::size_t>(field.rows()) == n_points() &&
                        static_cast<std::size_t>(field.cols()) == components(),
                    detail::concat("project: field shape ", field.rows(), "x", field.cols(),
                                   " does not match grid ", n_points(), "x", components()));
    Vector c = Vector::Zero(static_cast<Eigen::Index>(n_modes()));
    for (std::size_t comp = 0; comp < components(); ++comp)
      c.noalias() += tables_[comp].transpose() * field.col(static_cast<Eigen::Index>(comp));
    return weight_ * c;
  }

  /// Pointwise sum of c_k e_k on the grid.
  GridField evaluate(const Vector& coeffs) const {
    GridField out(static_cast<Eigen::Index>(n_points()), static_cast<Eigen::Index>(components()));
    evaluate_into(coeffs, out);
    return out;
  }

  void evaluate_into(const Vector& coeffs, GridField& out) const {
    detail::require(static_cast<std::size_t>(coeffs.size()) == n_modes(),
                    detail::concat("evaluate_on_grid: expected ", n_modes(),
                                   " coefficients, got ", coeffs.size()));
    out.resize(static_cast<Eigen::Index>(n_points()), static_cast<Eigen::Index>(components()));
    for (std::size_t comp = 0; comp < components(); ++comp)
      out.col(static_cast<Eigen::Index>(comp)).noalias() = tables_[comp] * coeffs;
  }

  /// Sample an analytic field f(x) -> components on the grid.
  template <typename F>
  GridField sample(F&& f) const {
    GridField out(static_cast<Eigen::Index>(n_points()), static_cast<Eigen::Index>(components()));
    std::array<double, 2> x{0.0, 0.0};
    for (Eigen::Index p = 0; p < points_.rows(); ++p) {
      for (std::size_t d = 0; d < dim(); ++d) x[d] = points_(p, static_cast<Eigen::Index>(d));
      for (std::size_t comp = 0; comp < components(); ++comp)
        out(p, static_cast<Eigen::Index>(comp)) = f(x.data(), comp);
    }
    return out;
  }

  /// Discrete L2 norm of a grid field.
  double grid_norm(const GridField& field) const {
    return std::sqrt(weight_ * field.squaredNorm());
  }

  /// Text fingerprint used for cache keys.
  std::string fingerprint() const {
    return detail::concat(to_string(kind_), ":", n_per_dim_, ":", grid_n_);
  }

 private:
  void build_modes() {
    const int n = static_cast<int>(n_per_dim_);
    auto less = [](const Mode& a, const Mode& b) {
      int na = a.wave[0] * a.wave[0] + a.wave[1] * a.wave[1];
      int nb = b.wave[0] * b.wave[0] + b.wave[1] * b.wave[1];
      if (na != nb) return na < nb;
      if (a.wave != b.wave) return a.wave < b.wave;
      return a.parity == Parity::cosine && b.parity == Parity::sine;
    };
    switch (kind_) {
      case BasisKind::scalar_sine_1d:
        for (int k = 1; k <= n; ++k) modes_.push_back(Mode{{k, 0}, Parity::sine, pi * pi * k * k});
        break;
      case BasisKind::scalar_sine_2d:
        for (int a = 1; a <= n; ++a)
          for (int b = 1; b <= n; ++b)
            modes_.push_back(Mode{{a, b}, Parity::sine, pi * pi * (a * a + b * b)});
        break;
      case BasisKind::divfree_fourier_2d:
        for (int a = 0; a <= n; ++a)
          for (int b = -n; b <= n; ++b) {
            if (a == 0 && b <= 0) continue;
            double norm = std::sqrt(static_cast<double>(a * a + b * b));
            std::array<double, 2> dir{-b / norm, a / norm};
            double lam = 4.0 * pi * pi * (a * a + b * b);
            modes_.push_back(Mode{{a, b}, Parity::cosine, lam, dir});
            modes_.push_back(Mode{{a, b}, Parity::sine, lam, dir});
          }
        break;
    }
    std::stable_sort(modes_.begin(), modes_.end(), less);
  }

  void build_grid() {
    const std::size_t d = dim();
    const std::size_t total = d == 1 ? grid_n_ : grid_n_ * grid_n_;
    points_.resize(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(d));
    const double h = spacing();
    for (std::size_t p = 0; p < total; ++p) {
      std::size_t i = p % grid_n_;
      points_(static_cast<Eigen::Index>(p), 0) = (static_cast<double>(i) + 0.5) * h;
      if (d == 2) {
        std::size_t j = p / grid_n_;
        points_(static_cast<Eigen::Index>(p), 1) = (static_cast<double>(j) + 0.5) * h;
      }
    }
    weight_ = 1.0 / static_cast<double>(total);
  }

  void build_tables() {
    tables_.assign(components(), Matrix(points_.rows(), static_cast<Eigen::Index>(modes_.size())));
    std::array<double, 2> x{0.0, 0.0};
    for (Eigen::Index p = 0; p < points_.rows(); ++p) {
      for (std::size_t d = 0; d < dim(); ++d) x[d] = points_(p, static_cast<Eigen::Index>(d));
      for (std::size_t k = 0; k < modes_.size(); ++k)
        for (std::size_t c = 0; c < components(); ++c)
          tables_[c](p, static_cast<Eigen::Index>(k)) = value(k, c, x.data());
    }
  }

  BasisKind kind_;
  std::size_t n_per_dim_;
  std::size_t grid_n_;
  std::vector<Mode> modes_;
  Matrix points_;
  double weight_ = 0.0;
  std::vector<Matrix> tables_;
};

inline GalerkinBasis build_basis(BasisKind kind, std::size_t n_per_dim,
                                 std::size_t grid_points_per_dim) {
  return GalerkinBasis(kind, n_per_dim, grid_points_per_dim);
}

inline Vector project(const GalerkinBasis& basis, const GridField& field) {
  return basis.project(field);
}

inline GridField evaluate_on_grid(const GalerkinBasis& basis, const Vector& coeffs) {
  return basis.evaluate(coeffs);
}

/// Discrete H^1_0 seminorm (sum_k lambda_k c_k^2)^(1/2).
inline double v_norm(const GalerkinBasis& basis, const Vector& coeffs) {
  detail::require(static_cast<std::size_t>(coeffs.size()) == basis.n_modes(),
                  "v_norm: coefficient length mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < basis.n_modes(); ++k)
    acc += basis.mode(k).stiffness * coeffs(static_cast<Eigen::Index>(k)) *
           coeffs(static_cast<Eigen::Index>(k));
  return std::sqrt(acc);
}

inline double h_norm(const Vector& coeffs) { return coeffs.norm(); }

}  // namespace brinkavg
