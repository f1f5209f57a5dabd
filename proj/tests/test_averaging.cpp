#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "brinkavg/averaging.hpp"
#include "brinkavg/validate.hpp"

using namespace brinkavg;

namespace {

CoefficientTerm make_term(CellFunction g, int wave, double amp, FastFunction h) {
  CoefficientTerm t;
  t.g = g;
  t.wave = {wave, 0};
  t.amplitude = amp;
  t.h = h;
  return t;
}

CoefficientSpec sin2_tanh2(double amp = 0.5) {
  return CoefficientSpec(1.0, {make_term(CellFunction::sin2, 1, amp, FastFunction::tanh2)}, 1, 1);
}

CoefficientSpec mixed_spec() {
  return CoefficientSpec(1.5,
                         {make_term(CellFunction::sin2, 1, 0.5, FastFunction::tanh2),
                          make_term(CellFunction::cos2, 2, -0.4, FastFunction::inv1p_sq),
                          make_term(CellFunction::sin, 3, 0.3, FastFunction::inv1p_sq)},
                         1, 1);
}

ProblemConfig averaged_config() {
  ProblemConfig c;
  c.n_per_dim = 8;
  c.grid_points_per_dim = 128;
  c.T = 0.2;
  c.dt = 2e-3;
  c.terms = {make_term(CellFunction::sin2, 1, 0.6, FastFunction::tanh2)};
  c.noise.q0 = 0.5;
  c.u0 = ProfileSpec{"low_mode", {}, 2.0};
  return c;
}

}  // namespace

TEST(AlphaBar, ZeroMeanCellFunctionsGiveAlpha0) {
  GalerkinBasis b(BasisKind::scalar_sine_1d, 4, 32);
  CoefficientSpec s(1.2,
                    {make_term(CellFunction::sin, 1, 0.5, FastFunction::tanh2),
                     make_term(CellFunction::cos, 3, 0.4, FastFunction::inv1p_sq)},
                    1, 1);
  auto noise = NoiseModel::from_decay(b, 1.0, 3.0);
  Vector xi = Vector::LinSpaced(4, 2.0, -1.0);
  Vector abar = alpha_bar(s, b, noise, xi);
  EXPECT_EQ((abar.array() - 1.2).abs().maxCoeff(), 0.0);
}

TEST(AlphaBar, ZeroNoiseIsPointEvaluation) {
  GalerkinBasis b(BasisKind::scalar_sine_1d, 4, 32);
  auto s = mixed_spec();
  Vector xi = Vector::LinSpaced(4, 1.0, 0.2);
  Vector abar = alpha_bar(s, b, NoiseModel::zero(4), xi);
  GridField u = b.evaluate(xi);
  for (std::size_t p = 0; p < b.n_points(); ++p) {
    double v = u(p, 0);
    EXPECT_NEAR(abar(p), s.cell_mean(&v), 1e-14);
    EXPECT_NEAR(abar(p), cell_average(s, v, 16), 1e-14);
  }
  RescaledCoefficient resc(s, b, 0.25);
  Vector ae = alpha_bar_eps(s, b, NoiseModel::zero(4), 0.25, xi);
  for (std::size_t p = 0; p < b.n_points(); ++p) {
    double v = u(p, 0);
    double x = b.points()(p, 0);
    EXPECT_NEAR(ae(p), eval_alpha_eps(s, 0.25, &x, &v), 1e-14);
  }
}

TEST(AlphaBar, SingleModeMonteCarloOracle) {
  GalerkinBasis b(BasisKind::scalar_sine_1d, 4, 8);
  Vector q = Vector::Zero(4);
  q(0) = 0.4;
  NoiseModel noise(q);
  auto s = sin2_tanh2(0.5);
  Vector abar = alpha_bar(s, b, noise, Vector::Zero(4));
  Rng rng = Rng::stream(12, 0, StreamTag::monte_carlo);
  const int draws = 100000;
  for (std::size_t p = 0; p < b.n_points(); ++p) {
    const double sd = std::sqrt(0.5 * q(0)) * std::abs(b.table()(p, 0));
    double acc = 0.0, acc2 = 0.0;
    for (int i = 0; i < draws; ++i) {
      double t = std::tanh(sd * rng.normal());
      double v = 1.0 + 0.25 * t * t;
      acc += v;
      acc2 += v * v;
    }
    double mean = acc / draws;
    double se = std::sqrt((acc2 / draws - mean * mean) / draws);
    EXPECT_LT(std::abs(abar(p) - mean), 3.0 * se) << "point " << p;
  }
}

TEST(AlphaBar, FunctionSpaceMonteCarloSuite) {
  auto s = validate("averaging");
  EXPECT_TRUE(s.passed()) << s.to_json().dump(2);
}

TEST(AlphaBar, WithinSpecBoundsAndLipschitz) {
  GalerkinBasis b(BasisKind::scalar_sine_1d, 6, 32);
  auto s = mixed_spec();
  auto noise = NoiseModel::from_decay(b, 0.5, 3.0);
  GaussianAverager avg(s, b, noise, 20);
  std::mt19937_64 gen(8);
  std::normal_distribution<double> nd(0.0, 1.5);
  for (int trial = 0; trial < 30; ++trial) {
    Vector xi(6), dxi(6);
    for (auto& x : xi) x = nd(gen);
    for (auto& x : dxi) x = 1e-3 * nd(gen);
    Vector a1 = avg.alpha_bar(xi), a2 = avg.alpha_bar(xi + dxi);
    EXPECT_GE(a1.minCoeff(), s.alpha_min());
    EXPECT_LE(a1.maxCoeff(), s.alpha_max());
    GridField d = b.evaluate(dxi);
    for (std::size_t p = 0; p < b.n_points(); ++p)
      EXPECT_LE(std::abs(a1(p) - a2(p)), s.lipschitz() * std::abs(d(p, 0)) * (1.0 + 1e-9) + 1e-15);
  }
}

TEST(AlphaBar, SymmetricUnderEvenH) {
  GalerkinBasis b(BasisKind::scalar_sine_1d, 4, 32);
  auto s = mixed_spec();
  auto noise = NoiseModel::from_decay(b, 0.5, 3.0);
  Vector xi = Vector::LinSpaced(4, 0.8, -0.3);
  Vector a = alpha_bar(s, b, noise, xi), m = alpha_bar(s, b, noise, -xi);
  EXPECT_LT((a - m).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(AlphaBar, DivfreeTwoDimensional) {
  GalerkinBasis b(BasisKind::divfree_fourier_2d, 1, 16);
  CoefficientTerm t = make_term(CellFunction::sin2, 1, 0.5, FastFunction::tanh2);
  t.wave = {1, 1};
  t.direction = {1.0, 1.0};
  CoefficientTerm u = make_term(CellFunction::cos2, 1, 0.3, FastFunction::inv1p_sq);
  CoefficientSpec s(1.0, {t, u}, 2, 2);
  auto noise = NoiseModel::from_decay(b, 0.3, 3.0);
  Vector xi = Vector::LinSpaced(static_cast<Eigen::Index>(b.n_modes()), 0.5, -0.5);
  // Tensor Gauss-Hermite against a direct 2D Monte Carlo at one point.
  Vector abar = alpha_bar(s, b, noise, xi);
  const std::size_t p = 37;
  auto m = invariant_marginal(b, noise, xi, p);
  auto f = factor_gaussian(m.mean, m.cov);
  Rng rng = Rng::stream(3, 0, StreamTag::monte_carlo);
  const int draws = 200000;
  double acc = 0.0, acc2 = 0.0;
  for (int i = 0; i < draws; ++i) {
    Vector z(2);
    z << rng.normal(), rng.normal();
    Vector v = f.mean + f.factor * z;
    double a = s.cell_mean(v.data());
    acc += a;
    acc2 += a * a;
  }
  double mean = acc / draws, se = std::sqrt((acc2 / draws - mean * mean) / draws);
  EXPECT_LT(std::abs(abar(p) - mean), 3.0 * se);
  EXPECT_GE(abar.minCoeff(), s.alpha_min());
}

TEST(AlphaBarEps, ConstantSpecAndTwoScaleDecay) {
  GalerkinBasis b(BasisKind::scalar_sine_1d, 4, 1024);
  auto noise = NoiseModel::from_decay(b, 0.5, 3.0);
  Vector xi = Vector::LinSpaced(4, 1.0, 0.1);
  auto c = CoefficientSpec::constant(2.0);
  EXPECT_EQ((alpha_bar_eps(c, b, noise, 0.1, xi).array() - 2.0).abs().maxCoeff(), 0.0);
  CoefficientSpec s(1.0, {make_term(CellFunction::sin, 1, 0.5, FastFunction::tanh2)}, 1, 1);
  GaussianAverager avg(s, b, noise, 20);
  GridField w = b.sample([](const double* x, std::size_t) { return std::exp(x[0]); });
  GridField phi = b.sample([](const double* x, std::size_t) { return 1.0 + x[0]; });
  std::vector<double> vals;
  for (double eps : {0.2, 0.1, 0.05, 0.025}) {
    RescaledCoefficient r(s, b, eps);
    Matrix ex = avg.term_expectations(b.evaluate(xi));
    Vector d = avg.alpha_bar_eps_from(ex, r) - avg.alpha_bar_from(ex);
    vals.push_back(std::abs(b.weight() * (d.array() * w.col(0).array() * phi.col(0).array()).sum()));
  }
  for (std::size_t i = 1; i < vals.size(); ++i) EXPECT_LT(vals[i], vals[i - 1]);
  EXPECT_THROW(alpha_bar_eps(s, b, noise, 0.005, xi), QuadratureGuardError);
}

TEST(Table, RoundTripAndCache) {
  GalerkinBasis b(BasisKind::divfree_fourier_2d, 1, 8);
  CoefficientTerm t = make_term(CellFunction::sin2, 1, 0.5, FastFunction::tanh2);
  CoefficientSpec s(1.0, {t}, 2, 2);
  auto noise = NoiseModel::from_decay(b, 0.3, 3.0);
  Vector xi = Vector::LinSpaced(static_cast<Eigen::Index>(b.n_modes()), 0.3, -0.2);
  auto tab = AveragedCoefficientTable::build(s, b, noise, xi, 12);
  EXPECT_GE(tab.values.minCoeff(), s.alpha_min());
  EXPECT_LE(tab.values.maxCoeff(), s.alpha_max());
  const auto dir = std::filesystem::temp_directory_path() / "brinkavg_table_test";
  std::filesystem::remove_all(dir);
  auto first = AveragedCoefficientTable::cached(dir, s, b, noise, xi, 12);
  EXPECT_TRUE(std::filesystem::exists(dir / (first.key + ".csv")));
  auto second = AveragedCoefficientTable::cached(dir, s, b, noise, xi, 12);
  EXPECT_EQ(first.key, second.key);
  EXPECT_EQ(second.values, tab.values);
  EXPECT_EQ(second.covs, tab.covs);
  EXPECT_NE(AveragedCoefficientTable::cache_key(s, noise, b, 13, xi), first.key);
  std::filesystem::remove_all(dir);
}

TEST(SolveAveraged, ZeroMeanReducesToConstantCoefficientRun) {
  ProblemConfig c = averaged_config();
  c.terms = {make_term(CellFunction::sin, 1, 0.6, FastFunction::tanh2)};
  Problem p = make_problem(c);
  ProblemConfig cc = c;
  cc.terms.clear();
  Problem pc = make_problem(cc);
  Trajectory ubar = solve_averaged(p).trajectory;
  Trajectory lin = simulate_coupled(pc, 0.1, std::uint64_t{1});
  for (std::size_t i = 0; i < ubar.n_samples(); ++i) EXPECT_LT((ubar.coeffs[i] - lin.coeffs[i]).norm(), 1e-14);
}

TEST(SolveAveraged, LaggedVersusPicardIsFirstOrder) {
  auto diff_at = [](double dt) {
    ProblemConfig c = averaged_config();
    c.dt = dt;
    Problem p = make_problem(c);
    auto lag = solve_averaged(p).trajectory.coeffs.back();
    AveragedOptions o;
    o.picard = true;
    auto pic = solve_averaged(p, o);
    EXPECT_GT(pic.max_picard_iterations, 1u);
    return (lag - pic.trajectory.coeffs.back()).norm();
  };
  const double d1 = diff_at(4e-3), d2 = diff_at(2e-3), d3 = diff_at(1e-3);
  EXPECT_GT(d1, 0.0);
  EXPECT_NEAR(std::log2(d1 / d2), 1.0, 0.2);
  EXPECT_NEAR(std::log2(d2 / d3), 1.0, 0.2);
}

TEST(SolveAveraged, PicardUniqueFromDistinctGuesses) {
  Problem p = make_problem(averaged_config());
  GaussianAverager avg(p.coefficient, p.basis, p.noise, p.config.gh_nodes);
  Vector a = p.u0;
  double worst = 0.0;
  Vector other = Vector::Zero(a.size());
  for (std::size_t n = 1; n <= p.n_steps(); ++n) {
    Vector f = p.forcing(0.0);
    auto r1 = averaged_picard_step(avg, a, f, p.config.dt, a, 1e-10, 50, n);
    auto r2 = averaged_picard_step(avg, a, f, p.config.dt, other - 3.0 * a, 1e-10, 50, n);
    worst = std::max(worst, (r1.solution - r2.solution).norm());
    a = r1.solution;
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(SolveAveraged, PicardFailureCarriesResiduals) {
  Problem p = make_problem(averaged_config());
  GaussianAverager avg(p.coefficient, p.basis, p.noise, p.config.gh_nodes);
  try {
    averaged_picard_step(avg, p.u0, p.forcing(0.0), 0.1, Vector::Zero(8), 1e-30, 3, 7);
    FAIL() << "expected PicardError";
  } catch (const PicardError& e) {
    EXPECT_EQ(e.residuals().size(), 3u);
    EXPECT_EQ(e.step(), 7u);
  }
}

TEST(SolveAveraged, UnforcedMonotoneDecayAndDeterminism) {
  Problem p = make_problem(averaged_config());
  auto r1 = solve_averaged(p).trajectory, r2 = solve_averaged(p).trajectory;
  for (std::size_t i = 1; i < r1.n_samples(); ++i) EXPECT_LE(r1.norm_h[i], r1.norm_h[i - 1]);
  for (std::size_t i = 0; i < r1.n_samples(); ++i) EXPECT_EQ(r1.coeffs[i], r2.coeffs[i]);
  EXPECT_FALSE(r1.has_fast());
}

class PsiTest : public ::testing::Test {
 protected:
  GalerkinBasis basis{BasisKind::scalar_sine_1d, 4, 64};
  NoiseModel noise = NoiseModel::from_decay(basis, 0.5, 3.0);
  Vector eta = (Vector(4) << 1.0, 0.4, -0.2, 0.1).finished();
  Vector xi = (Vector(4) << 0.6, -0.3, 0.2, 0.0).finished();
  Vector phi = Vector::Unit(4, 0);
  double eps = 0.125;
};

TEST_F(PsiTest, ConstantCoefficientIsZero) {
  EXPECT_EQ(resolvent_psi(CoefficientSpec::constant(1.0), basis, noise, eta, xi, phi, eps), 0.0);
  EXPECT_THROW(resolvent_psi(CoefficientSpec::constant(1.0), basis, noise, eta, xi, phi, 0.05), QuadratureGuardError);
}

TEST_F(PsiTest, TailTruncationAndGaussJacobiAgree) {
  auto s = sin2_tanh2();
  const double c = resolvent_rate(eps);
  const double t40 = resolvent_psi_truncated(s, basis, noise, eta, xi, phi, eps, c, 40.0);
  const double t80 = resolvent_psi_truncated(s, basis, noise, eta, xi, phi, eps, c, 80.0);
  EXPECT_LT(std::abs(t40 - t80), 1e-10);
  const double gj = resolvent_psi(s, basis, noise, eta, xi, phi, eps);
  EXPECT_NEAR(gj, t80, 1e-9 * std::max(1.0, std::abs(t80)));
  EXPECT_NE(gj, 0.0);
}

TEST_F(PsiTest, BoundedAcrossRateLadder) {
  auto s = sin2_tanh2();
  std::vector<double> v;
  for (double c : {1.0, 0.1, 0.01}) v.push_back(std::abs(resolvent_psi_rate(s, basis, noise, eta, xi, phi, eps, c)));
  double ratio = *std::max_element(v.begin(), v.end()) / *std::min_element(v.begin(), v.end());
  EXPECT_LT(ratio, 5.0);
  // 1/c growth would have given a factor of 100.
  EXPECT_LT(v[2] / v[0], 5.0);
}

TEST_F(PsiTest, LinearInTestFunction) {
  auto s = mixed_spec();
  Vector phi2 = (Vector(4) << 0.1, 1.0, -0.5, 0.3).finished();
  const double a = resolvent_psi(s, basis, noise, eta, xi, phi, eps);
  const double b = resolvent_psi(s, basis, noise, eta, xi, phi2, eps);
  const double ab = resolvent_psi(s, basis, noise, eta, xi, 2.0 * phi - 3.0 * phi2, eps);
  EXPECT_NEAR(ab, 2.0 * a - 3.0 * b, 1e-12 * std::max(1.0, std::abs(ab)));
}

TEST_F(PsiTest, StationaryStartGivesSmallIntegrand) {
  // eta = xi: the law of V_t is stationary only at t = infinity (the start is a
  // point mass), so G(1) differs from 0 but G(0) = 0 exactly.
  auto s = sin2_tanh2();
  detail::PsiIntegrand G(s, basis, noise, eta, xi, phi, eps, 20);
  EXPECT_NEAR(G(0.0), 0.0, 1e-15);
  EXPECT_NE(G(1.0), 0.0);
}
