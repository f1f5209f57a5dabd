#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <vector>

#include "brinkavg/basis.hpp"
#include "brinkavg/coefficient.hpp"
#include "brinkavg/config.hpp"
#include "brinkavg/fastproc.hpp"
#include "brinkavg/quadrature.hpp"
#include "brinkavg/slowsolver.hpp"

namespace brinkavg {

/// Averages of the coefficient against the pointwise Gaussian marginals of the
/// invariant measure. alpha acts pointwise on the field value, so only the law
/// of v(x) at each x enters:
///   abar(xi)(x)     = E[ int_Y alpha(y, Z_x) dy ],
///   abar_eps(xi)(x) = E[ alpha(x/eps, Z_x) ],      Z_x ~ N(xi(x), c(x)).
class GaussianAverager {
 public:
  GaussianAverager(const CoefficientSpec& spec, const GalerkinBasis& basis, const NoiseModel& noise,
                   std::size_t gh_nodes)
      : spec_(&spec), basis_(&basis), rule_(gauss_hermite_rule(gh_nodes)) {
    detail::require(gh_nodes >= 2, "gauss_hermite: need n_nodes >= 2");
    detail::require(spec.v_dim() == basis.components(), "averager: v dimension mismatch");
    const auto covs = invariant_covariances(basis, noise);
    factors_.reserve(covs.size());
    for (const auto& c : covs) factors_.push_back(factor_gaussian(Vector::Zero(c.rows()), c).factor);
  }

  std::size_t gh_nodes() const { return rule_.size(); }
  const QuadratureRule& rule() const { return rule_; }
  const GalerkinBasis& basis() const { return *basis_; }
  const Matrix& factor(std::size_t point) const { return factors_.at(point); }

  /// E[h_j(Z_x)] for every grid point (rows) and term (cols), Z_x with mean
  /// field `mean` and covariance scale `cov_scale` * c(x).
  Matrix term_expectations(const GridField& mean, double cov_scale = 1.0) const {
    const auto np = static_cast<Eigen::Index>(basis_->n_points());
    const std::size_t nt = spec_->terms().size();
    Matrix out(np, static_cast<Eigen::Index>(nt));
    const double root = std::sqrt(std::max(0.0, cov_scale));
    const std::size_t n = rule_.size();
    const std::size_t vd = spec_->v_dim();
    std::array<double, 2> z{0.0, 0.0};
    for (Eigen::Index p = 0; p < np; ++p) {
      const Matrix& L = factors_[static_cast<std::size_t>(p)];
      for (std::size_t j = 0; j < nt; ++j) {
        const auto& term = spec_->terms()[j];
        double acc = 0.0;
        if (vd == 1) {
          const double m = mean(p, 0), s = root * L(0, 0);
          for (std::size_t i = 0; i < n; ++i) {
            z[0] = m + s * rule_.nodes[i];
            acc += rule_.weights[i] * term.h_value(z.data(), 1);
          }
        } else {
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k) {
              const double x0 = root * rule_.nodes[i], x1 = root * rule_.nodes[k];
              z[0] = mean(p, 0) + L(0, 0) * x0 + L(0, 1) * x1;
              z[1] = mean(p, 1) + L(1, 0) * x0 + L(1, 1) * x1;
              acc += rule_.weights[i] * rule_.weights[k] * term.h_value(z.data(), 2);
            }
        }
        out(p, static_cast<Eigen::Index>(j)) = acc;
      }
    }
    return out;
  }

  /// abar(xi) on the grid from term expectations.
  Vector alpha_bar_from(const Matrix& expectations) const {
    Vector out = Vector::Constant(expectations.rows(), spec_->alpha0());
    for (std::size_t j = 0; j < spec_->terms().size(); ++j) {
      const auto& t = spec_->terms()[j];
      const double m = t.g_mean();
      if (m != 0.0) out += (t.amplitude * m) * expectations.col(static_cast<Eigen::Index>(j));
    }
    return out;
  }

  /// abar_eps(xi) on the grid from term expectations.
  Vector alpha_bar_eps_from(const Matrix& expectations, const RescaledCoefficient& resc) const {
    Vector out = Vector::Constant(expectations.rows(), spec_->alpha0());
    for (Eigen::Index p = 0; p < expectations.rows(); ++p)
      for (std::size_t j = 0; j < spec_->terms().size(); ++j)
        out(p) += resc.g(static_cast<std::size_t>(p), j) * expectations(p, static_cast<Eigen::Index>(j));
    return out;
  }

  Vector alpha_bar(const Vector& xi) const {
    return alpha_bar_from(term_expectations(basis_->evaluate(xi)));
  }

  Vector alpha_bar_eps(const Vector& xi, const RescaledCoefficient& resc) const {
    return alpha_bar_eps_from(term_expectations(basis_->evaluate(xi)), resc);
  }

 private:
  const CoefficientSpec* spec_;
  const GalerkinBasis* basis_;
  QuadratureRule rule_;
  std::vector<Matrix> factors_;
};

inline Vector alpha_bar(const CoefficientSpec& spec, const GalerkinBasis& basis, const NoiseModel& noise,
                        const Vector& xi, std::size_t gh_nodes = 20) {
  return GaussianAverager(spec, basis, noise, gh_nodes).alpha_bar(xi);
}

inline Vector alpha_bar_eps(const CoefficientSpec& spec, const GalerkinBasis& basis, const NoiseModel& noise,
                            double eps, const Vector& xi, std::size_t gh_nodes = 20) {
  RescaledCoefficient resc(spec, basis, eps);
  return GaussianAverager(spec, basis, noise, gh_nodes).alpha_bar_eps(xi, resc);
}

/// Tabulated abar over the grid together with the marginals it came from.
///
/// CSV layout (one header line, then one row per grid point):
///   # key=<cache key> gh_nodes=<n> components=<c>
///   x_1[,x_2],mean_1[,mean_2],cov_11[,cov_12,cov_21,cov_22],alpha_bar
struct AveragedCoefficientTable {
  std::string key;
  std::size_t gh_nodes = 0;
  std::size_t components = 1;
  Matrix points;   // n_points x dim
  Matrix means;    // n_points x components
  Matrix covs;     // n_points x components^2, row-major
  Vector values;

  static std::string cache_key(const CoefficientSpec& spec, const NoiseModel& noise,
                               const GalerkinBasis& basis, std::size_t gh_nodes, const Vector& xi) {
    std::ostringstream os;
    os.precision(17);
    os << spec.fingerprint() << "|" << noise.fingerprint() << "|" << basis.fingerprint() << "|" << gh_nodes << "|";
    for (Eigen::Index k = 0; k < xi.size(); ++k) os << xi(k) << ",";
    return detail::hex64(detail::fnv1a(os.str()));
  }

  static AveragedCoefficientTable build(const CoefficientSpec& spec, const GalerkinBasis& basis,
                                        const NoiseModel& noise, const Vector& xi, std::size_t gh_nodes) {
    AveragedCoefficientTable tab;
    tab.key = cache_key(spec, noise, basis, gh_nodes, xi);
    tab.gh_nodes = gh_nodes;
    tab.components = basis.components();
    tab.points = basis.points();
    const auto np = static_cast<Eigen::Index>(basis.n_points());
    const auto nc = static_cast<Eigen::Index>(basis.components());
    tab.means.resize(np, nc);
    tab.covs.resize(np, nc * nc);
    for (Eigen::Index p = 0; p < np; ++p) {
      auto m = invariant_marginal(basis, noise, xi, static_cast<std::size_t>(p));
      tab.means.row(p) = m.mean.transpose();
      for (Eigen::Index a = 0; a < nc; ++a)
        for (Eigen::Index b = 0; b < nc; ++b) tab.covs(p, a * nc + b) = m.cov(a, b);
    }
    tab.values = alpha_bar(spec, basis, noise, xi, gh_nodes);
    return tab;
  }

  void save_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << std::setprecision(17);
    out << "# key=" << key << " gh_nodes=" << gh_nodes << " components=" << components << "\n";
    for (Eigen::Index p = 0; p < points.rows(); ++p) {
      for (Eigen::Index d = 0; d < points.cols(); ++d) out << points(p, d) << ",";
      for (Eigen::Index c = 0; c < means.cols(); ++c) out << means(p, c) << ",";
      for (Eigen::Index c = 0; c < covs.cols(); ++c) out << covs(p, c) << ",";
      out << values(p) << "\n";
    }
  }

  static AveragedCoefficientTable load_csv(const std::filesystem::path& path, std::size_t dim) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    AveragedCoefficientTable tab;
    std::string line;
    std::getline(in, line);
    std::istringstream hs(line);
    std::string tok;
    while (hs >> tok) {
      if (tok.rfind("key=", 0) == 0) tab.key = tok.substr(4);
      if (tok.rfind("gh_nodes=", 0) == 0) tab.gh_nodes = std::stoul(tok.substr(9));
      if (tok.rfind("components=", 0) == 0) tab.components = std::stoul(tok.substr(11));
    }
    const std::size_t nc = tab.components;
    const std::size_t width = dim + nc + nc * nc + 1;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<double> row;
      std::istringstream ls(line);
      std::string cell;
      while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
      detail::require(row.size() == width, "averaged table: malformed row");
      rows.push_back(std::move(row));
    }
    const auto np = static_cast<Eigen::Index>(rows.size());
    tab.points.resize(np, static_cast<Eigen::Index>(dim));
    tab.means.resize(np, static_cast<Eigen::Index>(nc));
    tab.covs.resize(np, static_cast<Eigen::Index>(nc * nc));
    tab.values.resize(np);
    for (Eigen::Index p = 0; p < np; ++p) {
      const auto& r = rows[static_cast<std::size_t>(p)];
      std::size_t i = 0;
      for (std::size_t d = 0; d < dim; ++d) tab.points(p, static_cast<Eigen::Index>(d)) = r[i++];
      for (std::size_t c = 0; c < nc; ++c) tab.means(p, static_cast<Eigen::Index>(c)) = r[i++];
      for (std::size_t c = 0; c < nc * nc; ++c) tab.covs(p, static_cast<Eigen::Index>(c)) = r[i++];
      tab.values(p) = r[i];
    }
    return tab;
  }

  /// Loads `dir/<key>.csv` when present, otherwise builds and stores it.
  static AveragedCoefficientTable cached(const std::filesystem::path& dir, const CoefficientSpec& spec,
                                         const GalerkinBasis& basis, const NoiseModel& noise,
                                         const Vector& xi, std::size_t gh_nodes) {
    const std::string key = cache_key(spec, noise, basis, gh_nodes, xi);
    const auto path = dir / (key + ".csv");
    if (std::filesystem::exists(path)) {
      auto tab = load_csv(path, basis.dim());
      if (tab.key == key && static_cast<std::size_t>(tab.values.size()) == basis.n_points()) return tab;
    }
    std::filesystem::create_directories(dir);
    auto tab = build(spec, basis, noise, xi, gh_nodes);
    tab.save_csv(path);
    return tab;
  }
};

class PicardError : public std::runtime_error {
 public:
  PicardError(const std::string& what, std::vector<double> residuals, std::size_t step)
      : std::runtime_error(what), residuals_(std::move(residuals)), step_(step) {}
  const std::vector<double>& residuals() const { return residuals_; }
  std::size_t step() const { return step_; }

 private:
  std::vector<double> residuals_;
  std::size_t step_;
};

struct AveragedOptions {
  bool picard = false;
  double picard_tol = 1e-10;
  std::size_t picard_max_iter = 50;
};

struct PicardResult {
  Vector solution;
  std::vector<double> residuals;
};

/// One implicit step of the averaged equation with friction abar(a') solved by
/// fixed-point iteration from `guess`.
inline PicardResult averaged_picard_step(const GaussianAverager& avg, const Vector& a, const Vector& f,
                                         double dt, const Vector& guess, double tol,
                                         std::size_t max_iter, std::size_t step = 0) {
  const GalerkinBasis& basis = avg.basis();
  PicardResult res;
  Vector cur = guess;
  for (std::size_t it = 0; it < max_iter; ++it) {
    Matrix A = assemble_weighted_mass(basis, avg.alpha_bar(cur));
    Vector next = slow_step(a, A, f, dt, basis);
    double r = (next - cur).norm();
    res.residuals.push_back(r);
    cur = std::move(next);
    if (r <= tol) {
      res.solution = cur;
      return res;
    }
  }
  throw PicardError(detail::concat("Picard iteration did not converge at step ", step, " (last residual ",
                                   res.residuals.back(), ")"),
                    res.residuals, step);
}

struct AveragedRun {
  Trajectory trajectory;
  std::size_t max_picard_iterations = 0;
};

/// Deterministic averaged equation with the same stepper as the coupled run.
/// Default: friction abar(u_n) lagged by one step. Picard mode iterates each
/// step to a fixed point.
inline AveragedRun solve_averaged(const Problem& prob, const AveragedOptions& opts = {}) {
  const GalerkinBasis& basis = prob.basis;
  const double dt = prob.config.dt;
  const std::size_t steps = prob.n_steps();
  const std::size_t stride = prob.config.snapshot_stride;
  GaussianAverager avg(prob.coefficient, basis, prob.noise, prob.config.gh_nodes);

  AveragedRun run;
  Trajectory& traj = run.trajectory;
  traj.dt = dt;
  traj.stride = stride;
  Vector a = prob.u0;
  detail::record_sample(traj, 0.0, a, nullptr);
  Matrix A0 = assemble_weighted_mass(basis, avg.alpha_bar(a));
  detail::record_norms(traj, basis, a, a.dot(A0 * a));
  for (std::size_t n = 1; n <= steps; ++n) {
    const double t_left = static_cast<double>(n - 1) * dt;
    const Vector f = prob.forcing(t_left);
    Matrix A;
    if (opts.picard) {
      auto pr = averaged_picard_step(avg, a, f, dt, a, opts.picard_tol, opts.picard_max_iter, n);
      run.max_picard_iterations = std::max(run.max_picard_iterations, pr.residuals.size());
      a = pr.solution;
      A = assemble_weighted_mass(basis, avg.alpha_bar(a));
    } else {
      A = assemble_weighted_mass(basis, avg.alpha_bar(a));
      a = slow_step(a, A, f, dt, basis);
    }
    detail::check_finite(a, n, "averaged state");
    detail::record_norms(traj, basis, a, a.dot(A * a));
    if (n % stride == 0 || n == steps) detail::record_sample(traj, static_cast<double>(n) * dt, a, nullptr);
  }
  return run;
}

struct PsiQuadrature {
  std::size_t time_nodes = 64;
  std::size_t gh_nodes = 20;
};

/// c(eps) = sqrt(eps).
inline double resolvent_rate(double eps) { return std::sqrt(eps); }

namespace detail {

// P_t F(eta) at s = e^{-t}: int_D (E[alpha(x/eps, V_t(x))] - abar_eps(xi)(x)) <xi, phi> dx,
// V_t(x) ~ N(eta(x) s + xi(x)(1 - s), c(x)(1 - s^2)).
class PsiIntegrand {
 public:
  PsiIntegrand(const CoefficientSpec& spec, const GalerkinBasis& basis, const NoiseModel& noise,
               const Vector& eta, const Vector& xi, const Vector& phi, double eps, std::size_t gh_nodes)
      : avg_(spec, basis, noise, gh_nodes), resc_(spec, basis, eps), basis_(&basis) {
    eta_grid_ = basis.evaluate(eta);
    xi_grid_ = basis.evaluate(xi);
    const GridField phi_grid = basis.evaluate(phi);
    xi_phi_ = (xi_grid_.array() * phi_grid.array()).rowwise().sum().matrix();
    stationary_ = avg_.alpha_bar_eps_from(avg_.term_expectations(xi_grid_), resc_);
  }

  double operator()(double s) const {
    GridField mean = s * eta_grid_ + (1.0 - s) * xi_grid_;
    Vector a = avg_.alpha_bar_eps_from(avg_.term_expectations(mean, 1.0 - s * s), resc_);
    return basis_->weight() * ((a - stationary_).array() * xi_phi_.array()).sum();
  }

 private:
  GaussianAverager avg_;
  RescaledCoefficient resc_;
  const GalerkinBasis* basis_;
  GridField eta_grid_, xi_grid_;
  Vector xi_phi_;
  Vector stationary_;
};

}  // namespace detail

/// Psi(eta, xi) = int_0^inf e^{-c t} P_t^xi[F](eta) dt. With s = e^{-t} the
/// integral becomes int_0^1 s^{c-1} G(s) ds, evaluated with a Gauss rule for
/// the weight s^{c-1}.
inline double resolvent_psi_rate(const CoefficientSpec& spec, const GalerkinBasis& basis,
                                 const NoiseModel& noise, const Vector& eta, const Vector& xi,
                                 const Vector& phi, double eps, double rate, const PsiQuadrature& quad = {}) {
  detail::require(rate > 0.0, "resolvent_psi: rate c must be positive");
  if (spec.is_constant()) {
    check_resolution(basis, eps);
    return 0.0;
  }
  detail::PsiIntegrand G(spec, basis, noise, eta, xi, phi, eps, quad.gh_nodes);
  const QuadratureRule rule = gauss_jacobi_unit_rule(quad.time_nodes, rate - 1.0);
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.size(); ++i) acc += rule.weights[i] * G(rule.nodes[i]);
  return acc;
}

inline double resolvent_psi(const CoefficientSpec& spec, const GalerkinBasis& basis, const NoiseModel& noise,
                            const Vector& eta, const Vector& xi, const Vector& phi, double eps,
                            const PsiQuadrature& quad = {}) {
  return resolvent_psi_rate(spec, basis, noise, eta, xi, phi, eps, resolvent_rate(eps), quad);
}

/// Same integral truncated at t_max in the original time variable, by
/// composite Gauss-Legendre on unit panels.
inline double resolvent_psi_truncated(const CoefficientSpec& spec, const GalerkinBasis& basis,
                                      const NoiseModel& noise, const Vector& eta, const Vector& xi,
                                      const Vector& phi, double eps, double rate, double t_max,
                                      std::size_t nodes_per_panel = 16, std::size_t gh_nodes = 20) {
  detail::PsiIntegrand G(spec, basis, noise, eta, xi, phi, eps, gh_nodes);
  const auto panels = static_cast<std::size_t>(std::ceil(t_max));
  const double width = t_max / static_cast<double>(panels);
  double acc = 0.0;
  for (std::size_t k = 0; k < panels; ++k) {
    const double a = static_cast<double>(k) * width;
    const QuadratureRule rule = gauss_legendre_rule(nodes_per_panel, a, a + width);
    for (std::size_t i = 0; i < rule.size(); ++i) {
      const double t = rule.nodes[i];
      acc += rule.weights[i] * std::exp(-rate * t) * G(std::exp(-t));
    }
  }
  return acc;
}

}  // namespace brinkavg
