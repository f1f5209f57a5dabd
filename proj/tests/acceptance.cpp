// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "brinkavg/brinkavg.hpp"

using namespace brinkavg;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, double limit_seconds, const std::function<Outcome()>& fn) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (limit_seconds > 0.0 && secs >= limit_seconds) {
    o.pass = false;
    o.detail += detail::concat("; runtime limit ", limit_seconds, " s exceeded");
  }
  if (!o.pass) ++failures;
  std::printf("%s %2d %s: %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", id, title.c_str(), o.detail.c_str(), secs);
  std::fflush(stdout);
}

RunConfig ladder_config() {
  RunConfig rc;
  ProblemConfig& p = rc.problem;
  p.basis_kind = BasisKind::scalar_sine_1d;
  p.n_per_dim = 16;
  p.grid_points_per_dim = 512;
  p.T = 0.5;
  p.dt = 1e-3;
  p.u0 = ProfileSpec{"low_mode", {}, 4.0};
  p.v0 = ProfileSpec{"zero", {}, 1.0};
  p.alpha0 = 1.0;
  CoefficientTerm t;
  t.g = CellFunction::sin2;
  t.wave = {1, 0};
  t.amplitude = 0.5;
  t.h = FastFunction::tanh2;
  p.terms = {t};
  p.noise.q0 = 0.5;
  p.noise.decay_p = 3.0;
  rc.sweep.epsilons = {0.2, 0.1, 0.05, 0.025};
  rc.sweep.n_paths = 32;
  rc.sweep.base_seed = 1;
  rc.sweep.delta = 0.0;
  return rc;
}

std::string sweep_csv(const SweepReport& rep) {
  std::ostringstream os;
  write_sweep_csv(rep, os);
  return os.str();
}

}  // namespace

int main() {
  const RunConfig ladder = ladder_config();
  SweepReport sweep;  // shared by criteria 7, 8 and 10

  report(1, "pathwise contraction", 1.0, [] {
    GalerkinBasis basis(BasisKind::scalar_sine_1d, 16, 64);
    NoiseModel noise = NoiseModel::from_decay(basis, 0.5, 3.0);
    Vector eta1 = Vector::LinSpaced(16, 2.0, -1.0), eta2 = Vector::Constant(16, 0.5);
    Vector xi = Vector::LinSpaced(16, 0.3, -0.3);
    double worst = 0.0;
    for (double eps : {1.0, 0.1, 0.025}) {
      auto r = contraction_check(noise, eta1, eta2, xi, 5.0 * eps, eps, eps / 100.0, Rng::stream(21, 0, StreamTag::validation));
      worst = std::max(worst, r.max_relative_deviation);
    }
    return Outcome{worst < 1e-12, detail::concat("max relative deviation ", worst, " (limit 1e-12)")};
  });

  report(2, "invariant measure variance", 10.0, [] {
    GalerkinBasis basis(BasisKind::scalar_sine_1d, 8, 64);
    NoiseModel noise = NoiseModel::from_decay(basis, 0.5, 3.0);
    const double dt = 0.05, T = 200.0, burn = 20.0;
    OuPropagator prop(noise, dt, 1.0);
    Rng rng = Rng::stream(2, 0, StreamTag::validation);
    Vector b = Vector::Zero(8), zero = Vector::Zero(8), sum2 = Vector::Zero(8);
    std::size_t count = 0;
    for (std::size_t n = 1; n <= static_cast<std::size_t>(std::llround(T / dt)); ++n) {
      prop.step(b, zero, rng);
      if (static_cast<double>(n) * dt <= burn) continue;
      sum2 += b.cwiseProduct(b);
      ++count;
    }
    double worst = 0.0;
    for (Eigen::Index k = 0; k < 8; ++k) {
      const double target = 0.5 * noise.q(static_cast<std::size_t>(k));
      const double se = target * std::sqrt(2.0 / (T - burn));
      worst = std::max(worst, std::abs(sum2(k) / static_cast<double>(count) - target) / se);
    }
    return Outcome{worst <= 3.0, detail::concat("worst |z| over 8 modes ", worst, " (limit 3)")};
  });

  report(3, "fast-process moment bound", 30.0, [] {
    GalerkinBasis basis(BasisKind::scalar_sine_1d, 8, 64);
    NoiseModel noise = NoiseModel::from_decay(basis, 0.5, 3.0);
    Vector eta = Vector::LinSpaced(8, 1.5, -0.5), xi = Vector::LinSpaced(8, 0.4, 0.0);
    auto r = moment_bound_check(noise, eta, xi, 5.0, 1000, 0.01, 3);
    return Outcome{r.passed(), detail::concat("min over t of bound - estimate + 3 SE = ", r.worst_allowed_margin,
                                              " (raw margin ", r.worst_margin, ")")};
  });

  report(4, "quadrature exactness", 1.0, [] {
    double gh = 0.0;
    for (std::size_t n = 1; n <= 20; ++n) {
      QuadratureRule rule = gauss_hermite_rule(n);
      for (int k = 0; k <= static_cast<int>(2 * n - 1); ++k) {
        double q = 0.0;
        for (std::size_t i = 0; i < n; ++i) q += rule.weights[i] * std::pow(rule.nodes[i], k);
        gh = std::max(gh, std::abs(q - detail::normal_moment(k)) / std::max(1.0, detail::normal_abs_moment(k)));
      }
    }
    double cell = 0.0;
    for (CellFunction g : {CellFunction::sin, CellFunction::cos, CellFunction::sin_product}) {
      CoefficientTerm t;
      t.g = g;
      t.wave = {3, g == CellFunction::sin_product ? 2 : 0};
      t.amplitude = 0.7;
      t.h = FastFunction::inv1p_sq;
      CoefficientSpec spec(1.0, {t}, g == CellFunction::sin_product ? 2 : 1, 1);
      for (double v : {-2.0, 0.0, 0.5, 3.0}) cell = std::max(cell, std::abs(cell_average(spec, v, 16) - 1.0));
    }
    return Outcome{gh <= 1e-12 && cell <= 1e-14,
                   detail::concat("Gauss-Hermite n<=20 max scaled error ", gh, " (limit 1e-12); cell_average ", cell,
                                  " (limit 1e-14)")};
  });

  report(5, "energy decay with f = 0", 60.0, [&] {
    Problem prob = make_problem(ladder.problem);
    double worst = 0.0;
    for (double eps : ladder.sweep.epsilons)
      worst = std::max(worst, energy_diagnostics(simulate_coupled(prob, eps, std::uint64_t{5}), prob).max_h_increase);
    const double avg = energy_diagnostics(solve_averaged(prob).trajectory, prob).max_h_increase;
    return Outcome{worst <= 0.0 && avg <= 0.0,
                   detail::concat("max step increase coupled ", worst, ", averaged ", avg, " (limit 0)")};
  });

  report(6, "averaged-equation uniqueness", 60.0, [&] {
    Problem prob = make_problem(ladder.problem);
    GaussianAverager avg(prob.coefficient, prob.basis, prob.noise, prob.config.gh_nodes);
    Vector a = prob.u0;
    double worst = 0.0;
    std::size_t max_iter = 0;
    for (std::size_t n = 1; n <= prob.n_steps(); ++n) {
      const Vector f = prob.forcing(static_cast<double>(n - 1) * prob.config.dt);
      auto r1 = averaged_picard_step(avg, a, f, prob.config.dt, a, 1e-12, 100, n);
      auto r2 = averaged_picard_step(avg, a, f, prob.config.dt, -2.0 * a + Vector::Ones(a.size()), 1e-12, 100, n);
      worst = std::max(worst, (r1.solution - r2.solution).norm());
      max_iter = std::max({max_iter, r1.residuals.size(), r2.residuals.size()});
      a = r1.solution;
    }
    return Outcome{worst < 1e-9, detail::concat("max step-solution gap ", worst, " over ", prob.n_steps(),
                                                " steps, Picard iterations <= ", max_iter, " (limit 1e-9)")};
  });

  report(7, "convergence along the epsilon ladder", 0.0, [&] {
    sweep = convergence_sweep(ladder, 1);
    std::ostringstream os;
    os << "delta " << sweep.delta << "; median/P:";
    for (const auto& r : sweep.rows) os << " eps=" << r.epsilon << " " << r.median_error << "/" << r.p_exceed;
    const auto& c = sweep.checks;
    return Outcome{c.evaluated && c.median_decreasing && c.probability_zero_at_smallest, os.str()};
  });

  report(8, "decomposition diagnostics", 0.0, [&] {
    if (sweep.rows.empty()) return Outcome{false, "sweep unavailable"};
    std::ostringstream os;
    os << "median|S1|/|S3|:";
    for (const auto& r : sweep.rows) os << " eps=" << r.epsilon << " " << r.median_abs_s1 << "/" << std::abs(r.s3);
    os << "; S3 ratio " << sweep.checks.s3_ratio << " (limit 0.1)";
    const auto& c = sweep.checks;
    return Outcome{c.s1_decreasing && c.s3_decreasing && c.s3_ratio < 0.1, os.str()};
  });

  report(9, "resolvent mixing bound", 60.0, [] {
    GalerkinBasis basis(BasisKind::scalar_sine_1d, 4, 64);
    NoiseModel noise = NoiseModel::from_decay(basis, 0.5, 3.0);
    Vector eta(4), xi(4), phi = Vector::Unit(4, 0);
    eta << 1.0, 0.4, -0.2, 0.1;
    xi << 0.6, -0.3, 0.2, 0.0;
    const double eps = 0.125;
    CoefficientTerm t;
    t.g = CellFunction::sin2;
    t.wave = {1, 0};
    t.amplitude = 0.5;
    t.h = FastFunction::tanh2;
    CoefficientSpec spec(1.0, {t}, 1, 1);
    std::vector<double> v;
    for (double c : {1.0, 0.1, 0.01}) v.push_back(std::abs(resolvent_psi_rate(spec, basis, noise, eta, xi, phi, eps, c)));
    const double ratio = *std::max_element(v.begin(), v.end()) / *std::min_element(v.begin(), v.end());
    const double zero = resolvent_psi(CoefficientSpec::constant(1.0), basis, noise, eta, xi, phi, eps);
    return Outcome{ratio < 5.0 && zero == 0.0,
                   detail::concat("|Psi| at c=1,0.1,0.01: ", v[0], ", ", v[1], ", ", v[2], "; max/min ", ratio,
                                  " (limit 5); constant coefficient ", zero)};
  });

  report(10, "reproducibility across workers", 0.0, [&] {
    if (sweep.rows.empty()) return Outcome{false, "sweep unavailable"};
    const SweepReport eight = convergence_sweep(ladder, 8);
    const std::string a = sweep_csv(sweep), b = sweep_csv(eight);
    return Outcome{a == b, detail::concat("sweep CSV ", a.size(), " bytes, identical for 1 and 8 workers: ",
                                          a == b ? "yes" : "no")};
  });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
