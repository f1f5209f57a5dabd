#pragma once

#include <algorithm>
#include <limits>
#include <vector>

#include "brinkavg/basis.hpp"
#include "brinkavg/common.hpp"
#include "brinkavg/rng.hpp"

namespace brinkavg {

/// Trace-class covariance Q, diagonal in the Galerkin basis.
class NoiseModel {
 public:
  NoiseModel() = default;
  explicit NoiseModel(Vector q, std::string description = "list") : q_(std::move(q)), desc_(std::move(description)) {
    for (Eigen::Index k = 0; k < q_.size(); ++k)
      detail::require(q_(k) >= 0.0 && std::isfinite(q_(k)), "noise: eigenvalues must be finite and nonnegative");
  }

  /// q_k = q0 |k|^(-p), with |k| the Euclidean norm of the mode wave vector.
  static NoiseModel from_decay(const GalerkinBasis& basis, double q0, double p) {
    detail::require(q0 >= 0.0, "noise: q0 must be nonnegative");
    detail::require(p > static_cast<double>(basis.dim()),
                    detail::concat("noise: decay exponent p=", p, " must exceed the dimension ",
                                   basis.dim(), " for a trace-class covariance"));
    Vector q(static_cast<Eigen::Index>(basis.n_modes()));
    for (std::size_t k = 0; k < basis.n_modes(); ++k)
      q(static_cast<Eigen::Index>(k)) = q0 * std::pow(basis.mode(k).wave_norm(), -p);
    std::ostringstream os;
    os.precision(17);
    os << "decay:" << q0 << ":" << p;
    return NoiseModel(std::move(q), os.str());
  }

  static NoiseModel zero(std::size_t n_modes) {
    return NoiseModel(Vector::Zero(static_cast<Eigen::Index>(n_modes)), "zero");
  }

  const Vector& q() const { return q_; }
  double q(std::size_t k) const { return q_(static_cast<Eigen::Index>(k)); }
  std::size_t size() const { return static_cast<std::size_t>(q_.size()); }
  double trace() const { return q_.sum(); }
  bool is_zero() const { return q_.size() == 0 || q_.maxCoeff() == 0.0; }

  std::string fingerprint() const {
    std::ostringstream os;
    os.precision(17);
    os << desc_;
    for (Eigen::Index k = 0; k < q_.size(); ++k) os << "," << q_(k);
    return os.str();
  }

 private:
  Vector q_;
  std::string desc_ = "empty";
};

/// Fast field v^eps: spectral coefficients plus a grid cache.
struct FastState {
  Vector b;
  double t = 0.0;
  GridField grid_cache;
  bool cache_valid = false;

  void refresh(const GalerkinBasis& basis) {
    basis.evaluate_into(b, grid_cache);
    cache_valid = true;
  }
  const GridField& grid() const {
    if (!cache_valid) throw std::logic_error("FastState: grid cache read before refresh");
    return grid_cache;
  }
};

inline FastState make_fast_state(const GalerkinBasis& basis, Vector b, double t = 0.0) {
  FastState s{std::move(b), t, {}, false};
  s.refresh(basis);
  return s;
}

/// Per-step constants of the exact Ornstein-Uhlenbeck transition
///   dv = -(v - u)/eps dt + sqrt(Q/eps) dW   with u frozen over the step.
class OuPropagator {
 public:
  OuPropagator(const NoiseModel& noise, double dt, double eps) : dt_(dt), eps_(eps) {
    detail::require(dt > 0.0, "ou_exact_step: dt must be positive");
    detail::require(eps > 0.0, "ou_exact_step: epsilon must be positive");
    decay_ = std::exp(-dt / eps);
    const double one_minus = -std::expm1(-2.0 * dt / eps);
    sd_ = (0.5 * one_minus * noise.q()).cwiseSqrt();
  }

  double decay() const { return decay_; }
  const Vector& std_dev() const { return sd_; }
  double dt() const { return dt_; }

  /// b <- u + (b - u) e^{-dt/eps} + eta, eta_k ~ N(0, q_k/2 (1 - e^{-2 dt/eps})).
  /// One normal draw per mode, in mode order, regardless of q_k.
  void step(Vector& b, const Vector& u, Rng& rng) const {
    detail::require(b.size() == sd_.size() && u.size() == sd_.size(),
                    "ou_exact_step: coefficient length mismatch");
    for (Eigen::Index k = 0; k < b.size(); ++k) {
      double z = rng.normal();
      b(k) = u(k) + (b(k) - u(k)) * decay_ + sd_(k) * z;
    }
  }

  /// Same transition with caller-supplied standard normals z (one per mode).
  void step(Vector& b, const Vector& u, const Vector& z) const {
    detail::require(b.size() == sd_.size() && u.size() == sd_.size() && z.size() == sd_.size(),
                    "ou_exact_step: coefficient length mismatch");
    b = u + (b - u) * decay_ + sd_.cwiseProduct(z);
  }

 private:
  double dt_;
  double eps_;
  double decay_ = 1.0;
  Vector sd_;
};

/// Exact one-step law of the fast equation. The grid cache is invalidated;
/// call FastState::refresh before reading it.
inline FastState ou_exact_step(FastState state, const Vector& u_coeffs, double dt, double eps,
                               const NoiseModel& noise, Rng& rng) {
  OuPropagator prop(noise, dt, eps);
  prop.step(state.b, u_coeffs, rng);
  state.t += dt;
  state.cache_valid = false;
  return state;
}

/// Pointwise marginal of the invariant Gaussian field with mean xi.
struct GaussianMarginal {
  Vector mean;  // components
  Matrix cov;   // components x components
};

/// mean = sum_k xi_k e_k(x), cov = sum_k (q_k / 2) e_k(x) e_k(x)^T at grid point `point`.
inline GaussianMarginal invariant_marginal(const GalerkinBasis& basis, const NoiseModel& noise,
                                           const Vector& xi, std::size_t point) {
  detail::require(static_cast<std::size_t>(xi.size()) == basis.n_modes(),
                  "invariant_marginal: coefficient length mismatch");
  detail::require(noise.size() == basis.n_modes(), "invariant_marginal: noise size mismatch");
  const auto nc = static_cast<Eigen::Index>(basis.components());
  const auto p = static_cast<Eigen::Index>(point);
  GaussianMarginal m{Vector::Zero(nc), Matrix::Zero(nc, nc)};
  for (Eigen::Index c = 0; c < nc; ++c) m.mean(c) = basis.table(static_cast<std::size_t>(c)).row(p).dot(xi);
  for (std::size_t k = 0; k < basis.n_modes(); ++k) {
    double half_q = 0.5 * noise.q(k);
    if (half_q == 0.0) continue;
    for (Eigen::Index a = 0; a < nc; ++a)
      for (Eigen::Index b = 0; b < nc; ++b)
        m.cov(a, b) += half_q * basis.table(static_cast<std::size_t>(a))(p, static_cast<Eigen::Index>(k)) *
                       basis.table(static_cast<std::size_t>(b))(p, static_cast<Eigen::Index>(k));
  }
  return m;
}

/// Stationary covariance at every grid point (independent of the mean).
inline std::vector<Matrix> invariant_covariances(const GalerkinBasis& basis, const NoiseModel& noise) {
  std::vector<Matrix> out;
  out.reserve(basis.n_points());
  const Vector zero = Vector::Zero(static_cast<Eigen::Index>(basis.n_modes()));
  for (std::size_t p = 0; p < basis.n_points(); ++p)
    out.push_back(invariant_marginal(basis, noise, zero, p).cov);
  return out;
}

struct ContractionResult {
  double max_relative_deviation = 0.0;
  double initial_distance = 0.0;
  double final_distance = 0.0;
  double final_time = 0.0;
};

/// Runs two fast paths from eta1 and eta2 with xi frozen and common noise,
/// and measures the deviation from ||v1(t) - v2(t)|| = e^{-t/eps} ||eta1 - eta2||.
inline ContractionResult contraction_check(const NoiseModel& noise, const Vector& eta1,
                                           const Vector& eta2, const Vector& xi, double T,
                                           double eps, double dt, const Rng& rng) {
  detail::require(T > 0.0 && dt > 0.0 && eps > 0.0, "contraction_check: T, dt, eps must be positive");
  OuPropagator prop(noise, dt, eps);
  Rng r1 = rng, r2 = rng;
  Vector b1 = eta1, b2 = eta2;
  ContractionResult res;
  res.initial_distance = (eta1 - eta2).norm();
  const auto steps = static_cast<std::size_t>(std::llround(T / dt));
  double t = 0.0;
  for (std::size_t n = 1; n <= steps; ++n) {
    prop.step(b1, xi, r1);
    prop.step(b2, xi, r2);
    t = static_cast<double>(n) * dt;
    double dist = (b1 - b2).norm();
    double expected = std::exp(-t / eps) * res.initial_distance;
    double dev = res.initial_distance == 0.0 ? dist : std::abs(dist - expected) / expected;
    res.max_relative_deviation = std::max(res.max_relative_deviation, dev);
    res.final_distance = dist;
  }
  res.final_time = t;
  return res;
}

struct MomentBoundResult {
  std::vector<double> times;
  std::vector<double> estimates;   // sample mean of ||v(t)||^2
  std::vector<double> std_errors;
  std::vector<double> bounds;      // ||eta||^2 e^{-t} + ||xi||^2 + Tr Q
  double worst_margin = 0.0;       // min_t (bound - estimate)
  double worst_allowed_margin = 0.0;  // min_t (bound - estimate + 3 SE)
  bool passed() const { return worst_allowed_margin >= 0.0; }
};

/// Ensemble check of E||v(t)||^2 <= ||eta||^2 e^{-t} + ||xi||^2 + Tr Q at the
/// unit timescale (eps = 1), recorded every `dt`.
inline MomentBoundResult moment_bound_check(const NoiseModel& noise, const Vector& eta,
                                            const Vector& xi, double T, std::size_t n_paths,
                                            double dt, std::uint64_t seed) {
  detail::require(n_paths >= 100, "moment_bound_check: need at least 100 paths");
  detail::require(T > 0.0 && dt > 0.0, "moment_bound_check: T and dt must be positive");
  OuPropagator prop(noise, dt, 1.0);
  const auto steps = static_cast<std::size_t>(std::llround(T / dt));
  std::vector<double> sum(steps, 0.0), sum_sq(steps, 0.0);
  for (std::size_t path = 0; path < n_paths; ++path) {
    Rng rng = Rng::stream(seed, path, StreamTag::validation);
    Vector b = eta;
    for (std::size_t n = 0; n < steps; ++n) {
      prop.step(b, xi, rng);
      double e = b.squaredNorm();
      sum[n] += e;
      sum_sq[n] += e * e;
    }
  }
  MomentBoundResult res;
  res.worst_margin = res.worst_allowed_margin = std::numeric_limits<double>::infinity();
  const double np = static_cast<double>(n_paths);
  for (std::size_t n = 0; n < steps; ++n) {
    double t = static_cast<double>(n + 1) * dt;
    double mean = sum[n] / np;
    double var = std::max(0.0, (sum_sq[n] - np * mean * mean) / (np - 1.0));
    double se = std::sqrt(var / np);
    double bound = eta.squaredNorm() * std::exp(-t) + xi.squaredNorm() + noise.trace();
    res.times.push_back(t);
    res.estimates.push_back(mean);
    res.std_errors.push_back(se);
    res.bounds.push_back(bound);
    res.worst_margin = std::min(res.worst_margin, bound - mean);
    res.worst_allowed_margin = std::min(res.worst_allowed_margin, bound - mean + 3.0 * se);
  }
  return res;
}

}  // namespace brinkavg
