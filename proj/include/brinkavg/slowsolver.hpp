#pragma once

#include <vector>

#include <Eigen/Cholesky>

#include "brinkavg/basis.hpp"
#include "brinkavg/coefficient.hpp"
#include "brinkavg/config.hpp"
#include "brinkavg/fastproc.hpp"
#include "brinkavg/rng.hpp"

namespace brinkavg {

/// Sampled slow trajectory. Samples are taken every `stride` steps and always
/// include t = 0 and t = T. Per-step diagnostics cover every step (index 0 is
/// the initial state).
struct Trajectory {
  double dt = 0.0;
  std::size_t stride = 1;
  std::vector<double> times;
  std::vector<Vector> coeffs;
  std::vector<Vector> fast;  // fast coefficients at the sample times (coupled runs)
  std::vector<double> norm_h;
  std::vector<double> norm_v;
  std::vector<double> friction_energy;  // a^T A a after each step

  std::size_t n_samples() const { return times.size(); }
  bool has_fast() const { return !fast.empty(); }
};

/// A_ij = sum_x w weight(x) <e_i(x), e_j(x)>.
inline Matrix assemble_weighted_mass(const GalerkinBasis& basis, const Vector& weight_on_grid) {
  detail::require(static_cast<std::size_t>(weight_on_grid.size()) == basis.n_points(),
                  "assemble: weight field does not match the grid");
  const auto n = static_cast<Eigen::Index>(basis.n_modes());
  Matrix A = Matrix::Zero(n, n);
  for (std::size_t c = 0; c < basis.components(); ++c) {
    const Matrix& E = basis.table(c);
    Matrix WE = (E.array().colwise() * weight_on_grid.array()).matrix();
    A.noalias() += E.transpose() * WE;
  }
  A *= basis.weight();
  return 0.5 * (A + A.transpose());
}

/// Friction matrix A_ij = int_D alpha(x/eps, v(x)) e_i e_j dx by grid quadrature.
inline Matrix assemble_friction_matrix(const GalerkinBasis& basis, const RescaledCoefficient& alpha_eps,
                                       const GridField& fast_grid) {
  if (!fast_grid.allFinite()) throw std::runtime_error("assemble_friction_matrix: non-finite fast values");
  detail::require(static_cast<std::size_t>(fast_grid.rows()) == basis.n_points(),
                  "assemble_friction_matrix: fast field does not match the grid");
  return assemble_weighted_mass(basis, alpha_eps.on_grid(fast_grid));
}

inline Matrix assemble_friction_matrix(const GalerkinBasis& basis, const CoefficientSpec& spec,
                                       double eps, const GridField& fast_grid) {
  RescaledCoefficient alpha_eps(spec, basis, eps);
  return assemble_friction_matrix(basis, alpha_eps, fast_grid);
}

/// Solves (I + dt (Lambda + A)) a' = a + dt f.
inline Vector slow_step(const Vector& a, const Matrix& A, const Vector& f, double dt,
                        const GalerkinBasis& basis) {
  detail::require(dt > 0.0, "slow_step: dt must be positive");
  const auto n = static_cast<Eigen::Index>(basis.n_modes());
  detail::require(a.size() == n && f.size() == n && A.rows() == n && A.cols() == n,
                  "slow_step: dimension mismatch");
  Matrix M = dt * A;
  M.diagonal() += Vector::Ones(n) + dt * basis.stiffness();
  Eigen::LLT<Matrix> llt(M);
  if (llt.info() != Eigen::Success) {
    Eigen::LDLT<Matrix> ldlt(M);
    throw std::runtime_error(detail::concat("slow_step: system matrix not positive definite (rcond ~ ",
                                            ldlt.rcond(), ")"));
  }
  return llt.solve(a + dt * f);
}

namespace detail {

inline void record_sample(Trajectory& traj, double t, const Vector& a, const Vector* fast) {
  traj.times.push_back(t);
  traj.coeffs.push_back(a);
  if (fast) traj.fast.push_back(*fast);
}

inline void record_norms(Trajectory& traj, const GalerkinBasis& basis, const Vector& a, double energy) {
  traj.norm_h.push_back(h_norm(a));
  traj.norm_v.push_back(v_norm(basis, a));
  traj.friction_energy.push_back(energy);
}

inline void check_finite(const Vector& v, std::size_t step, const char* what) {
  if (!v.allFinite())
    throw SimulationAbort(concat("non-finite ", what, " at step ", step), step);
}

}  // namespace detail

/// Coupled slow-fast run with Lie splitting per step:
///   (1) exact OU step with u frozen, (2) refresh the fast grid cache,
///   (3) assemble the friction matrix, (4) implicit slow step.
/// `normals(z)` fills z with the standard normals of one step, one per mode.
template <typename NormalSource>
Trajectory simulate_coupled_with(const Problem& prob, double eps, NormalSource&& normals) {
  const GalerkinBasis& basis = prob.basis;
  const double dt = prob.config.dt;
  const std::size_t steps = prob.n_steps();
  const std::size_t stride = prob.config.snapshot_stride;
  RescaledCoefficient alpha_eps(prob.coefficient, basis, eps);
  OuPropagator ou(prob.noise, dt, eps);

  Trajectory traj;
  traj.dt = dt;
  traj.stride = stride;
  Vector a = prob.u0;
  Vector z(a.size());
  FastState fast = make_fast_state(basis, prob.v0);
  detail::record_sample(traj, 0.0, a, &fast.b);
  detail::record_norms(traj, basis, a, a.dot(assemble_friction_matrix(basis, alpha_eps, fast.grid()) * a));

  for (std::size_t n = 1; n <= steps; ++n) {
    const double t_left = static_cast<double>(n - 1) * dt;
    normals(z);
    ou.step(fast.b, a, z);
    fast.t = t_left + dt;
    detail::check_finite(fast.b, n, "fast state");
    fast.refresh(basis);
    Matrix A = assemble_friction_matrix(basis, alpha_eps, fast.grid());
    a = slow_step(a, A, prob.forcing(t_left), dt, basis);
    detail::check_finite(a, n, "slow state");
    detail::record_norms(traj, basis, a, a.dot(A * a));
    if (n % stride == 0 || n == steps) detail::record_sample(traj, static_cast<double>(n) * dt, a, &fast.b);
  }
  return traj;
}

inline Trajectory simulate_coupled(const Problem& prob, double eps, Rng& rng) {
  return simulate_coupled_with(prob, eps, [&rng](Vector& z) {
    for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = rng.normal();
  });
}

inline Trajectory simulate_coupled(const Problem& prob, double eps, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, 0, StreamTag::fast_noise);
  return simulate_coupled(prob, eps, rng);
}

struct EnergyReport {
  double sup_h = 0.0;
  double sup_h_bound = 0.0;       // sup_t sqrt(e^t (||f||^2_{L2(0,t;L2)} + ||u0||^2))
  double integral_v2 = 0.0;       // sum_n dt ||a_n||_V^2, n >= 1
  double integral_v2_bound = 0.0; // 0.5 ||u0||^2 + sum_n dt |f_{n-1} . a_n|
  double sup_v = 0.0;
  double sup_v_bound = 0.0;       // sqrt(||u0||_V^2 + 0.5 sum_n dt (||f|| + alpha_max ||a_n||)^2)
  bool monotone_h = true;         // ||a_{n+1}|| <= ||a_n|| for every step
  double max_h_increase = 0.0;

  bool h_bound_ok() const { return sup_h <= sup_h_bound; }
  bool v_integral_ok() const { return integral_v2 <= integral_v2_bound; }
  bool sup_v_ok() const { return sup_v <= sup_v_bound; }
  bool all_ok() const { return h_bound_ok() && v_integral_ok() && sup_v_ok(); }
};

/// Energy estimates along a trajectory with stride 1. The bounds follow the
/// discrete analogues of the Galerkin energy and H^1 estimates with alpha <= alpha_max.
inline EnergyReport energy_diagnostics(const Trajectory& traj, const Problem& prob) {
  detail::require(traj.stride == 1 && traj.n_samples() == traj.norm_h.size(),
                  "energy_diagnostics: needs a stride-1 trajectory");
  EnergyReport r;
  const double dt = traj.dt;
  const double amax = prob.coefficient.alpha_max();
  const double u0_h2 = prob.u0.squaredNorm();
  const double u0_v = v_norm(prob.basis, prob.u0);
  double f_l2 = 0.0, v_int = 0.0, fa = 0.0, v_acc = 0.0;
  r.sup_h = traj.norm_h[0];
  r.sup_v = traj.norm_v[0];
  r.sup_h_bound = std::sqrt(u0_h2);
  for (std::size_t n = 1; n < traj.n_samples(); ++n) {
    const double t = traj.times[n];
    const Vector f = prob.forcing(traj.times[n - 1]);
    f_l2 += dt * f.squaredNorm();
    r.sup_h = std::max(r.sup_h, traj.norm_h[n]);
    r.sup_h_bound = std::max(r.sup_h_bound, std::sqrt(std::exp(t) * (f_l2 + u0_h2)));
    v_int += dt * traj.norm_v[n] * traj.norm_v[n];
    fa += dt * std::abs(f.dot(traj.coeffs[n]));
    double s = f.norm() + amax * traj.norm_h[n];
    v_acc += 0.5 * dt * s * s;
    r.sup_v = std::max(r.sup_v, traj.norm_v[n]);
    double inc = traj.norm_h[n] - traj.norm_h[n - 1];
    if (inc > 0.0) {
      r.monotone_h = false;
      r.max_h_increase = std::max(r.max_h_increase, inc);
    }
  }
  r.integral_v2 = v_int;
  r.integral_v2_bound = 0.5 * u0_h2 + fa;
  r.sup_v_bound = std::sqrt(u0_v * u0_v + v_acc);
  return r;
}

}  // namespace brinkavg
