#pragma once

#include <array>
#include <string>
#include <vector>

#include "brinkavg/basis.hpp"
#include "brinkavg/common.hpp"

namespace brinkavg {

// Periodic cell functions g(y) on Y = [0,1)^d, all bounded by one.
enum class CellFunction { sin, cos, sin_product, sin2, cos2 };
// Bounded C^1 functions h(v) of the fast value, all bounded by one.
enum class FastFunction { one, inv1p_sq, tanh2 };

inline CellFunction cell_function_from_string(const std::string& s) {
  if (s == "sin") return CellFunction::sin;
  if (s == "cos") return CellFunction::cos;
  if (s == "sin_product") return CellFunction::sin_product;
  if (s == "sin2") return CellFunction::sin2;
  if (s == "cos2") return CellFunction::cos2;
  throw std::invalid_argument("unknown cell function type: " + s);
}

inline std::string to_string(CellFunction g) {
  switch (g) {
    case CellFunction::sin: return "sin";
    case CellFunction::cos: return "cos";
    case CellFunction::sin_product: return "sin_product";
    case CellFunction::sin2: return "sin2";
    case CellFunction::cos2: return "cos2";
  }
  return "unknown";
}

inline FastFunction fast_function_from_string(const std::string& s) {
  if (s == "one") return FastFunction::one;
  if (s == "inv1p_sq") return FastFunction::inv1p_sq;
  if (s == "tanh2") return FastFunction::tanh2;
  throw std::invalid_argument("unknown fast function type: " + s);
}

inline std::string to_string(FastFunction h) {
  switch (h) {
    case FastFunction::one: return "one";
    case FastFunction::inv1p_sq: return "inv1p_sq";
    case FastFunction::tanh2: return "tanh2";
  }
  return "unknown";
}

struct CoefficientTerm {
  CellFunction g = CellFunction::sin;
  std::array<int, 2> wave{1, 0};
  double amplitude = 0.0;
  FastFunction h = FastFunction::one;
  std::array<double, 2> direction{1.0, 0.0};  // for tanh2; normalized on construction

  double g_value(const double* y, std::size_t y_dim) const {
    double phase = 0.0;
    for (std::size_t d = 0; d < y_dim; ++d) phase += 2.0 * pi * wave[d] * y[d];
    switch (g) {
      case CellFunction::sin: return std::sin(phase);
      case CellFunction::cos: return std::cos(phase);
      case CellFunction::sin_product: {
        double p = 1.0;
        for (std::size_t d = 0; d < y_dim; ++d)
          if (wave[d] != 0) p *= std::sin(2.0 * pi * wave[d] * y[d]);
        return p;
      }
      case CellFunction::sin2: {
        double s = std::sin(phase);
        return s * s;
      }
      case CellFunction::cos2: {
        double c = std::cos(phase);
        return c * c;
      }
    }
    return 0.0;
  }

  // Exact cell mean of g over Y.
  double g_mean() const {
    bool zero_wave = wave[0] == 0 && wave[1] == 0;
    switch (g) {
      case CellFunction::sin: return 0.0;
      case CellFunction::cos: return zero_wave ? 1.0 : 0.0;
      case CellFunction::sin_product: return zero_wave ? 1.0 : 0.0;
      case CellFunction::sin2: return zero_wave ? 0.0 : 0.5;
      case CellFunction::cos2: return zero_wave ? 1.0 : 0.5;
    }
    return 0.0;
  }

  // Largest frequency of g along any axis.
  int max_frequency() const {
    int k = std::max(std::abs(wave[0]), std::abs(wave[1]));
    return (g == CellFunction::sin2 || g == CellFunction::cos2) ? 2 * k : k;
  }

  double h_value(const double* v, std::size_t v_dim) const {
    switch (h) {
      case FastFunction::one: return 1.0;
      case FastFunction::inv1p_sq: {
        double r2 = 0.0;
        for (std::size_t i = 0; i < v_dim; ++i) r2 += v[i] * v[i];
        return 1.0 / (1.0 + r2);
      }
      case FastFunction::tanh2: {
        double s = 0.0;
        for (std::size_t i = 0; i < v_dim; ++i) s += direction[i] * v[i];
        double t = std::tanh(s);
        return t * t;
      }
    }
    return 0.0;
  }

  // Gradient of h, written into grad[0..v_dim).
  void h_gradient(const double* v, std::size_t v_dim, double* grad) const {
    switch (h) {
      case FastFunction::one:
        for (std::size_t i = 0; i < v_dim; ++i) grad[i] = 0.0;
        return;
      case FastFunction::inv1p_sq: {
        double r2 = 0.0;
        for (std::size_t i = 0; i < v_dim; ++i) r2 += v[i] * v[i];
        double d = 1.0 + r2;
        for (std::size_t i = 0; i < v_dim; ++i) grad[i] = -2.0 * v[i] / (d * d);
        return;
      }
      case FastFunction::tanh2: {
        double s = 0.0;
        for (std::size_t i = 0; i < v_dim; ++i) s += direction[i] * v[i];
        double t = std::tanh(s);
        for (std::size_t i = 0; i < v_dim; ++i) grad[i] = 2.0 * t * (1.0 - t * t) * direction[i];
        return;
      }
    }
  }

  // sup |grad h| in closed form.
  double h_lipschitz() const {
    switch (h) {
      case FastFunction::one: return 0.0;
      case FastFunction::inv1p_sq: return 3.0 * std::sqrt(3.0) / 8.0;  // at |v| = 1/sqrt(3)
      case FastFunction::tanh2: return 4.0 / (3.0 * std::sqrt(3.0));   // at tanh = 1/sqrt(3)
    }
    return 0.0;
  }
};

/// Separable Brinkman coefficient alpha(y, v) = alpha0 + sum_j a_j g_j(y) h_j(v).
class CoefficientSpec {
 public:
  CoefficientSpec() = default;
  CoefficientSpec(double alpha0, std::vector<CoefficientTerm> terms, std::size_t y_dim,
                  std::size_t v_dim)
      : alpha0_(alpha0), terms_(std::move(terms)), y_dim_(y_dim), v_dim_(v_dim) {
    detail::require(y_dim >= 1 && y_dim <= 2, "coefficient: y dimension must be 1 or 2");
    detail::require(v_dim >= 1 && v_dim <= 2, "coefficient: v dimension must be 1 or 2");
    for (auto& t : terms_) {
      double n = 0.0;
      for (std::size_t i = 0; i < v_dim_; ++i) n += t.direction[i] * t.direction[i];
      detail::require(n > 0.0, "coefficient: tanh2 direction must be nonzero");
      n = std::sqrt(n);
      for (std::size_t i = 0; i < v_dim_; ++i) t.direction[i] /= n;
      for (std::size_t i = v_dim_; i < 2; ++i) t.direction[i] = 0.0;
      for (std::size_t d = y_dim_; d < 2; ++d) t.wave[d] = 0;
    }
    detail::require(positivity_margin() > 0.0,
                    detail::concat("coefficient: alpha0 - sum |a_j| = ", positivity_margin(),
                                   " must be positive"));
  }

  static CoefficientSpec constant(double alpha0, std::size_t y_dim = 1, std::size_t v_dim = 1) {
    return CoefficientSpec(alpha0, {}, y_dim, v_dim);
  }

  double alpha0() const { return alpha0_; }
  const std::vector<CoefficientTerm>& terms() const { return terms_; }
  std::size_t y_dim() const { return y_dim_; }
  std::size_t v_dim() const { return v_dim_; }
  bool is_constant() const {
    for (const auto& t : terms_)
      if (t.amplitude != 0.0) return false;
    return true;
  }

  double amplitude_sum() const {
    double s = 0.0;
    for (const auto& t : terms_) s += std::abs(t.amplitude);
    return s;
  }
  /// Lower bound alpha0 - sum sup|g| sup|h| (sup bounds are one).
  double positivity_margin() const { return alpha0_ - amplitude_sum(); }
  double alpha_min() const { return positivity_margin(); }
  double alpha_max() const { return alpha0_ + amplitude_sum(); }
  /// Uniform Lipschitz constant of alpha(y, .) in v.
  double lipschitz() const {
    double s = 0.0;
    for (const auto& t : terms_) s += std::abs(t.amplitude) * t.h_lipschitz();
    return s;
  }
  int max_frequency() const {
    int k = 0;
    for (const auto& t : terms_) k = std::max(k, t.max_frequency());
    return k;
  }

  /// alpha(y, v); y is wrapped into the cell.
  double eval(const double* y, const double* v) const {
    std::array<double, 2> yy{0.0, 0.0};
    for (std::size_t d = 0; d < y_dim_; ++d) yy[d] = detail::frac(y[d]);
    double a = alpha0_;
    for (const auto& t : terms_) a += t.amplitude * t.g_value(yy.data(), y_dim_) * t.h_value(v, v_dim_);
    return a;
  }

  /// Cell-averaged coefficient using exact cell means: alpha0 + sum a_j <g_j> h_j(v).
  double cell_mean(const double* v) const {
    double a = alpha0_;
    for (const auto& t : terms_) {
      double m = t.g_mean();
      if (m != 0.0) a += t.amplitude * m * t.h_value(v, v_dim_);
    }
    return a;
  }

  std::string fingerprint() const {
    std::ostringstream os;
    os.precision(17);
    os << "alpha0=" << alpha0_ << ";y=" << y_dim_ << ";v=" << v_dim_;
    for (const auto& t : terms_)
      os << ";[" << to_string(t.g) << "," << t.wave[0] << "," << t.wave[1] << "," << t.amplitude
         << "," << to_string(t.h) << "," << t.direction[0] << "," << t.direction[1] << "]";
    return os.str();
  }

 private:
  double alpha0_ = 1.0;
  std::vector<CoefficientTerm> terms_;
  std::size_t y_dim_ = 1;
  std::size_t v_dim_ = 1;
};

inline double eval_alpha(const CoefficientSpec& spec, const double* y, const double* v) {
  return spec.eval(y, v);
}

/// alpha(frac(x / eps), v).
inline double eval_alpha_eps(const CoefficientSpec& spec, double eps, const double* x,
                             const double* v) {
  detail::require(eps > 0.0, "eval_alpha_eps: epsilon must be positive");
  std::array<double, 2> y{0.0, 0.0};
  for (std::size_t d = 0; d < spec.y_dim(); ++d) y[d] = detail::frac(x[d] / eps);
  return spec.eval(y.data(), v);
}

/// Midpoint-rule average of alpha(., v) over the unit cell. Exact for the
/// trigonometric cell functions once cells_per_dim exceeds their frequency.
inline double cell_average(const CoefficientSpec& spec, const double* v, std::size_t cells_per_dim) {
  detail::require(cells_per_dim >= 4, "cell_average: cells_per_dim must be >= 4");
  const double h = 1.0 / static_cast<double>(cells_per_dim);
  double acc = 0.0;
  std::array<double, 2> y{0.0, 0.0};
  if (spec.y_dim() == 1) {
    for (std::size_t i = 0; i < cells_per_dim; ++i) {
      y[0] = (static_cast<double>(i) + 0.5) * h;
      acc += spec.eval(y.data(), v);
    }
    return acc * h;
  }
  for (std::size_t j = 0; j < cells_per_dim; ++j)
    for (std::size_t i = 0; i < cells_per_dim; ++i) {
      y[0] = (static_cast<double>(i) + 0.5) * h;
      y[1] = (static_cast<double>(j) + 0.5) * h;
      acc += spec.eval(y.data(), v);
    }
  return acc * h * h;
}

inline double cell_average(const CoefficientSpec& spec, double v, std::size_t cells_per_dim) {
  return cell_average(spec, &v, cells_per_dim);
}

/// Minimum number of grid points per epsilon-cell per dimension.
inline constexpr double kMinPointsPerCell = 8.0;

inline void check_resolution(const GalerkinBasis& basis, double eps) {
  detail::require(eps > 0.0, "epsilon must be positive");
  const double per_cell = eps * static_cast<double>(basis.grid_points_per_dim());
  if (per_cell < kMinPointsPerCell)
    throw QuadratureGuardError(detail::concat("quadrature guard: eps=", eps, " resolved by ",
                                              per_cell, " grid points per cell (need >= ",
                                              kMinPointsPerCell, ")"));
}

/// Grid values of a_j g_j(frac(x/eps)) for every term, cached per (basis, eps).
class RescaledCoefficient {
 public:
  RescaledCoefficient(const CoefficientSpec& spec, const GalerkinBasis& basis, double eps)
      : spec_(&spec), eps_(eps) {
    check_resolution(basis, eps);
    detail::require(spec.y_dim() == basis.dim(), "coefficient y dimension must match the domain");
    detail::require(spec.v_dim() == basis.components(),
                    "coefficient v dimension must match the field components");
    const auto np = static_cast<Eigen::Index>(basis.n_points());
    g_.resize(np, static_cast<Eigen::Index>(spec.terms().size()));
    std::array<double, 2> y{0.0, 0.0};
    for (Eigen::Index p = 0; p < np; ++p) {
      for (std::size_t d = 0; d < basis.dim(); ++d)
        y[d] = detail::frac(basis.points()(p, static_cast<Eigen::Index>(d)) / eps);
      for (std::size_t j = 0; j < spec.terms().size(); ++j) {
        const auto& t = spec.terms()[j];
        g_(p, static_cast<Eigen::Index>(j)) = t.amplitude * t.g_value(y.data(), basis.dim());
      }
    }
  }

  double eps() const { return eps_; }
  const CoefficientSpec& spec() const { return *spec_; }
  /// a_j g_j(x_p / eps).
  double g(std::size_t point, std::size_t term) const {
    return g_(static_cast<Eigen::Index>(point), static_cast<Eigen::Index>(term));
  }

  /// alpha(x_p/eps, v) for fast value v at grid point p.
  double at(std::size_t point, const double* v) const {
    double a = spec_->alpha0();
    const auto p = static_cast<Eigen::Index>(point);
    for (std::size_t j = 0; j < spec_->terms().size(); ++j)
      a += g_(p, static_cast<Eigen::Index>(j)) * spec_->terms()[j].h_value(v, spec_->v_dim());
    return a;
  }

  /// alpha(x/eps, v(x)) on the whole grid.
  Vector on_grid(const GridField& v) const {
    Vector out(v.rows());
    std::array<double, 2> val{0.0, 0.0};
    for (Eigen::Index p = 0; p < v.rows(); ++p) {
      for (Eigen::Index c = 0; c < v.cols(); ++c) val[static_cast<std::size_t>(c)] = v(p, c);
      out(p) = at(static_cast<std::size_t>(p), val.data());
    }
    return out;
  }

 private:
  const CoefficientSpec* spec_;
  double eps_;
  Matrix g_;
};

namespace detail {
inline double grid_dot(const GridField& a, const GridField& b, Eigen::Index p) {
  return a.row(p).dot(b.row(p));
}
}  // namespace detail

/// I(eps) = int_D (alpha(x/eps, z) - int_Y alpha(y, z) dy) <w, phi> dx on the
/// basis grid, one value per epsilon.
inline std::vector<double> two_scale_test(const CoefficientSpec& spec, const GalerkinBasis& basis,
                                          const GridField& z, const GridField& w,
                                          const GridField& phi, const std::vector<double>& eps_list) {
  const auto np = static_cast<Eigen::Index>(basis.n_points());
  detail::require(z.rows() == np && w.rows() == np && phi.rows() == np,
                  "two_scale_test: fields must live on the basis grid");
  detail::require(w.cols() == phi.cols(), "two_scale_test: w and phi component mismatch");
  detail::require(static_cast<std::size_t>(z.cols()) == spec.v_dim(),
                  "two_scale_test: z components must match the coefficient v dimension");
  std::vector<double> out;
  out.reserve(eps_list.size());
  std::array<double, 2> val{0.0, 0.0};
  for (double eps : eps_list) {
    RescaledCoefficient resc(spec, basis, eps);
    double acc = 0.0;
    for (Eigen::Index p = 0; p < np; ++p) {
      for (Eigen::Index c = 0; c < z.cols(); ++c) val[static_cast<std::size_t>(c)] = z(p, c);
      double diff = resc.at(static_cast<std::size_t>(p), val.data()) - spec.cell_mean(val.data());
      acc += diff * detail::grid_dot(w, phi, p);
    }
    out.push_back(acc * basis.weight());
  }
  return out;
}

/// Variant taking the test function as basis coefficients.
inline std::vector<double> two_scale_test(const CoefficientSpec& spec, const GalerkinBasis& basis,
                                          const GridField& z, const GridField& w,
                                          const Vector& phi_coeffs,
                                          const std::vector<double>& eps_list) {
  return two_scale_test(spec, basis, z, w, basis.evaluate(phi_coeffs), eps_list);
}

}  // namespace brinkavg
