#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "brinkavg/averaging.hpp"
#include "brinkavg/coefficient.hpp"
#include "brinkavg/config.hpp"
#include "brinkavg/fastproc.hpp"
#include "brinkavg/quadrature.hpp"
#include "brinkavg/slowsolver.hpp"

namespace brinkavg {

struct ValidationCheck {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool passed = false;
};

struct ValidationSummary {
  std::string suite;
  std::vector<ValidationCheck> checks;
  bool passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return !checks.empty();
  }
  nlohmann::json to_json() const {
    nlohmann::json j{{"suite", suite}, {"passed", passed()}, {"checks", nlohmann::json::array()}};
    for (const auto& c : checks)
      j["checks"].push_back({{"name", c.name}, {"value", c.value}, {"threshold", c.threshold}, {"passed", c.passed}});
    return j;
  }
};

inline const std::vector<std::string>& validation_suites() {
  static const std::vector<std::string> names{"basis", "quadrature", "ou", "energy", "averaging", "psi"};
  return names;
}

namespace detail {

inline void check_below(ValidationSummary& s, std::string name, double value, double threshold) {
  s.checks.push_back({std::move(name), value, threshold, value < threshold});
}

inline void check_at_most(ValidationSummary& s, std::string name, double value, double threshold) {
  s.checks.push_back({std::move(name), value, threshold, value <= threshold});
}

inline CoefficientSpec sin2_tanh2_spec(double alpha0, double amp, std::size_t y_dim = 1, std::size_t v_dim = 1) {
  CoefficientTerm t;
  t.g = CellFunction::sin2;
  t.wave = {1, 0};
  t.amplitude = amp;
  t.h = FastFunction::tanh2;
  t.direction = {1.0, 0.0};
  return CoefficientSpec(alpha0, {t}, y_dim, v_dim);
}

// Double factorial moment E[Z^k] of the standard normal.
inline double normal_moment(int k) {
  if (k % 2 == 1) return 0.0;
  double m = 1.0;
  for (int i = k - 1; i > 1; i -= 2) m *= i;
  return m;
}

// E|Z|^k, the scale against which the error of the k-th moment is measured.
inline double normal_abs_moment(int k) {
  return std::pow(2.0, 0.5 * k) * std::tgamma(0.5 * (k + 1)) / std::sqrt(pi);
}

inline ValidationSummary validate_basis() {
  ValidationSummary s{"basis", {}};
  const std::vector<std::pair<BasisKind, std::size_t>> cases{
      {BasisKind::scalar_sine_1d, 16}, {BasisKind::scalar_sine_2d, 8}, {BasisKind::divfree_fourier_2d, 4}};
  for (auto [kind, n] : cases) {
    GalerkinBasis b(kind, n, kind == BasisKind::divfree_fourier_2d ? 2 * n + 1 : 2 * n);
    Matrix mass = assemble_weighted_mass(b, Vector::Ones(static_cast<Eigen::Index>(b.n_points())));
    const auto nm = static_cast<Eigen::Index>(b.n_modes());
    check_below(s, to_string(kind) + " mass - I (max abs)", (mass - Matrix::Identity(nm, nm)).cwiseAbs().maxCoeff(),
                1e-12);
    // Stiffness from analytic gradients under the grid quadrature.
    Matrix stiff = Matrix::Zero(nm, nm);
    for (std::size_t c = 0; c < b.components(); ++c)
      for (std::size_t axis = 0; axis < b.dim(); ++axis) {
        Matrix G(static_cast<Eigen::Index>(b.n_points()), nm);
        for (Eigen::Index p = 0; p < G.rows(); ++p) {
          double x[2] = {b.points()(p, 0), b.dim() > 1 ? b.points()(p, 1) : 0.0};
          for (Eigen::Index k = 0; k < nm; ++k) G(p, k) = b.derivative(static_cast<std::size_t>(k), c, axis, x);
        }
        stiff.noalias() += b.weight() * G.transpose() * G;
      }
    Matrix lam = b.stiffness().asDiagonal();
    check_below(s, to_string(kind) + " stiffness - diag(lambda) (relative)",
                (stiff - lam).cwiseAbs().maxCoeff() / b.stiffness().maxCoeff(), 1e-12);
    if (kind == BasisKind::divfree_fourier_2d) {
      double worst = 0.0;
      for (Eigen::Index p = 0; p < static_cast<Eigen::Index>(b.n_points()); ++p) {
        double x[2] = {b.points()(p, 0), b.points()(p, 1)};
        for (std::size_t k = 0; k < b.n_modes(); ++k) {
          double div = b.derivative(k, 0, 0, x) + b.derivative(k, 1, 1, x);
          worst = std::max(worst, std::abs(div) / (2.0 * pi * b.mode(k).wave_norm()));
        }
      }
      check_below(s, "divfree pointwise divergence (relative)", worst, 1e-12);
    }
  }
  return s;
}

inline ValidationSummary validate_quadrature() {
  ValidationSummary s{"quadrature", {}};
  for (std::size_t n : {2u, 3u, 5u, 8u, 12u, 20u}) {
    QuadratureRule rule = gauss_hermite_rule(n);
    double worst = 0.0;
    for (int k = 0; k <= static_cast<int>(2 * n - 1); ++k) {
      double q = 0.0;
      for (std::size_t i = 0; i < n; ++i) q += rule.weights[i] * std::pow(rule.nodes[i], k);
      double exact = normal_moment(k);
      worst = std::max(worst, std::abs(q - exact) / std::max(1.0, normal_abs_moment(k)));
    }
    check_at_most(s, detail::concat("gauss_hermite n=", n, " degree<=", 2 * n - 1, " relative error"), worst, 1e-12);
  }
  CoefficientTerm t;
  t.g = CellFunction::sin_product;
  t.wave = {1, 1};
  t.amplitude = 0.5;
  t.h = FastFunction::inv1p_sq;
  CoefficientSpec spec(1.0, {t}, 2, 1);
  double worst = 0.0;
  for (double v : {-2.0, -0.3, 0.0, 0.7, 3.0}) worst = std::max(worst, std::abs(cell_average(spec, v, 8) - 1.0));
  check_at_most(s, "cell_average zero-mean trigonometric cell function", worst, 1e-14);
  CoefficientSpec sq = sin2_tanh2_spec(1.0, 0.5);
  double th = std::tanh(1.0);
  check_at_most(s, "cell_average sin^2 * tanh^2 at v=1", std::abs(cell_average(sq, 1.0, 8) - (1.0 + 0.25 * th * th)),
                1e-14);
  return s;
}

inline ValidationSummary validate_ou() {
  ValidationSummary s{"ou", {}};
  GalerkinBasis basis(BasisKind::scalar_sine_1d, 8, 64);
  NoiseModel noise = NoiseModel::from_decay(basis, 0.5, 3.0);
  Vector eta1 = Vector::LinSpaced(8, 1.0, -1.0), eta2 = Vector::Constant(8, 0.3), xi = Vector::LinSpaced(8, 0.2, 0.9);
  auto c = contraction_check(noise, eta1, eta2, xi, 2.0, 1.0, 0.01, Rng(7));
  check_below(s, "contraction identity relative deviation", c.max_relative_deviation, 1e-12);
  // Stationary variance per mode from one long run at eps = 1.
  const double dt = 0.05, T = 200.0, burn = 20.0;
  OuPropagator prop(noise, dt, 1.0);
  Rng rng = Rng::stream(11, 0, StreamTag::validation);
  Vector b = Vector::Zero(8), zero = Vector::Zero(8), sum = Vector::Zero(8), sum2 = Vector::Zero(8);
  std::size_t count = 0;
  for (std::size_t n = 1; n <= static_cast<std::size_t>(std::llround(T / dt)); ++n) {
    prop.step(b, zero, rng);
    if (static_cast<double>(n) * dt <= burn) continue;
    sum += b;
    sum2 += b.cwiseProduct(b);
    ++count;
  }
  // b^2 decorrelates at rate 2, so Var(time mean of b^2) ~ 2 sigma^4 / span.
  const double n_eff = T - burn;
  double worst = 0.0;
  for (Eigen::Index k = 0; k < 8; ++k) {
    double var = sum2(k) / static_cast<double>(count);
    double target = 0.5 * noise.q(static_cast<std::size_t>(k));
    double se = target * std::sqrt(2.0 / n_eff);
    worst = std::max(worst, std::abs(var - target) / se);
  }
  check_at_most(s, "stationary variance vs q_k/2 (worst z-score)", worst, 3.0);
  return s;
}

inline ValidationSummary validate_energy() {
  ValidationSummary s{"energy", {}};
  ProblemConfig cfg;
  cfg.n_per_dim = 8;
  cfg.grid_points_per_dim = 256;
  cfg.T = 0.2;
  cfg.dt = 2e-3;
  cfg.terms = sin2_tanh2_spec(1.0, 0.5).terms();
  cfg.noise.q0 = 0.5;
  Problem prob = make_problem(cfg);
  double worst = 0.0;
  for (double eps : {0.2, 0.1, 0.05}) {
    Trajectory tr = simulate_coupled(prob, eps, std::uint64_t{3});
    auto rep = energy_diagnostics(tr, prob);
    worst = std::max(worst, rep.max_h_increase);
  }
  check_at_most(s, "coupled: max per-step increase of ||u||_H (f=0)", worst, 0.0);
  auto run = solve_averaged(prob);
  check_at_most(s, "averaged: max per-step increase of ||u||_H (f=0)",
                energy_diagnostics(run.trajectory, prob).max_h_increase, 0.0);
  return s;
}

inline ValidationSummary validate_averaging() {
  ValidationSummary s{"averaging", {}};
  GalerkinBasis basis(BasisKind::scalar_sine_1d, 4, 16);
  NoiseModel noise = NoiseModel::from_decay(basis, 0.8, 3.0);
  CoefficientSpec spec = sin2_tanh2_spec(1.0, 0.6);
  Vector xi(4);
  xi << 0.8, -0.3, 0.2, 0.1;
  Vector abar = alpha_bar(spec, basis, noise, xi, 20);
  // Function-space Monte Carlo: sample whole stationary fields.
  const std::size_t draws = 20000;
  Rng rng = Rng::stream(5, 0, StreamTag::monte_carlo);
  const auto np = static_cast<Eigen::Index>(basis.n_points());
  Vector sum = Vector::Zero(np), sum2 = Vector::Zero(np);
  Vector sd = (0.5 * noise.q()).cwiseSqrt();
  for (std::size_t d = 0; d < draws; ++d) {
    Vector b = xi;
    for (Eigen::Index k = 0; k < b.size(); ++k) b(k) += sd(k) * rng.normal();
    GridField v = basis.evaluate(b);
    for (Eigen::Index p = 0; p < np; ++p) {
      double val = v(p, 0);
      double a = spec.cell_mean(&val);
      sum(p) += a;
      sum2(p) += a * a;
    }
  }
  double worst = 0.0;
  const double nd = static_cast<double>(draws);
  for (Eigen::Index p = 0; p < np; ++p) {
    double mean = sum(p) / nd;
    double se = std::sqrt(std::max(1e-300, (sum2(p) / nd - mean * mean) / nd));
    worst = std::max(worst, std::abs(mean - abar(p)) / se);
  }
  check_at_most(s, "abar vs function-space Monte Carlo (worst z-score over grid)", worst, 3.0);
  double lo = abar.minCoeff(), hi = abar.maxCoeff();
  s.checks.push_back({"abar within [alpha_min, alpha_max]", lo, spec.alpha_min(),
                      lo >= spec.alpha_min() && hi <= spec.alpha_max()});
  return s;
}

inline ValidationSummary validate_psi() {
  ValidationSummary s{"psi", {}};
  GalerkinBasis basis(BasisKind::scalar_sine_1d, 4, 64);
  NoiseModel noise = NoiseModel::from_decay(basis, 0.5, 3.0);
  Vector eta(4), xi(4), phi = Vector::Zero(4);
  eta << 1.0, 0.4, -0.2, 0.1;
  xi << 0.6, -0.3, 0.2, 0.0;
  phi(0) = 1.0;
  const double eps = 0.125;
  double psi_const = resolvent_psi(CoefficientSpec::constant(1.0), basis, noise, eta, xi, phi, eps);
  check_at_most(s, "constant coefficient |Psi|", std::abs(psi_const), 0.0);
  CoefficientSpec spec = sin2_tanh2_spec(1.0, 0.5);
  std::vector<double> vals;
  for (double c : {1.0, 0.1, 0.01}) vals.push_back(std::abs(resolvent_psi_rate(spec, basis, noise, eta, xi, phi, eps, c)));
  double ratio = *std::max_element(vals.begin(), vals.end()) / *std::min_element(vals.begin(), vals.end());
  check_below(s, "Psi ladder over c in {1, 0.1, 0.01}: max/min", ratio, 5.0);
  return s;
}

}  // namespace detail

/// Runs one named invariant suite with fixed seeds.
inline ValidationSummary validate(const std::string& suite) {
  if (suite == "basis") return detail::validate_basis();
  if (suite == "quadrature") return detail::validate_quadrature();
  if (suite == "ou") return detail::validate_ou();
  if (suite == "energy") return detail::validate_energy();
  if (suite == "averaging") return detail::validate_averaging();
  if (suite == "psi") return detail::validate_psi();
  throw std::invalid_argument("unknown validation suite: " + suite);
}

}  // namespace brinkavg
