#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Eigenvalues>

#include "brinkavg/common.hpp"

namespace brinkavg {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  std::size_t size() const { return nodes.size(); }
};

namespace detail {

// Golub-Welsch: nodes/weights of the Gauss rule for monic three-term
// recurrence coefficients (diag, offdiag_sq) and total mass mu0.
inline QuadratureRule golub_welsch(const std::vector<double>& diag,
                                   const std::vector<double>& offdiag_sq, double mu0) {
  const auto n = static_cast<Eigen::Index>(diag.size());
  Matrix jacobi = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) jacobi(i, i) = diag[static_cast<std::size_t>(i)];
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    double b = std::sqrt(offdiag_sq[static_cast<std::size_t>(i)]);
    jacobi(i, i + 1) = b;
    jacobi(i + 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(jacobi);
  QuadratureRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    rule.nodes[static_cast<std::size_t>(i)] = eig.eigenvalues()(i);
    double v0 = eig.eigenvectors()(0, i);
    rule.weights[static_cast<std::size_t>(i)] = mu0 * v0 * v0;
  }
  return rule;
}

}  // namespace detail

/// Gauss-Hermite rule for the standard normal law: sum_i w_i g(x_i) ~ E[g(Z)],
/// Z ~ N(0,1). Weights sum to one. Exact for polynomials of degree <= 2n-1.
inline QuadratureRule gauss_hermite_rule(std::size_t n) {
  detail::require(n >= 1, "gauss_hermite_rule: need at least one node");
  std::vector<double> diag(n, 0.0), off(n > 0 ? n - 1 : 0);
  for (std::size_t k = 1; k < n; ++k) off[k - 1] = static_cast<double>(k);
  auto rule = detail::golub_welsch(diag, off, 1.0);
  // Newton-polish the nodes on the orthonormal recurrence and take Christoffel
  // weights 1 / sum_k p_k(x)^2; the eigenvector route loses the tiny outer weights.
  auto eval = [n](double x, double& pn, double& sum_sq) {
    double pm = 0.0, p = 1.0;
    sum_sq = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      sum_sq += p * p;
      double kk = static_cast<double>(k);
      double next = (x * p - std::sqrt(kk) * pm) / std::sqrt(kk + 1.0);
      pm = p;
      p = next;
    }
    pn = p;
    return pm;  // p_{n-1}
  };
  for (std::size_t i = 0; i < n; ++i) {
    double x = rule.nodes[i], pn = 0.0, ss = 0.0;
    for (int it = 0; it < 3; ++it) {
      double pn1 = eval(x, pn, ss);
      double d = std::sqrt(static_cast<double>(n)) * pn1;
      if (d == 0.0) break;
      x -= pn / d;
    }
    eval(x, pn, ss);
    rule.nodes[i] = x;
    rule.weights[i] = 1.0 / ss;
  }
  // Enforce exact symmetry.
  for (std::size_t i = 0; i < n / 2; ++i) {
    std::size_t j = n - 1 - i;
    double x = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.nodes[i] = -x;
    rule.nodes[j] = x;
    rule.weights[i] = rule.weights[j] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

/// Gauss-Legendre rule on [a, b].
inline QuadratureRule gauss_legendre_rule(std::size_t n, double a = -1.0, double b = 1.0) {
  detail::require(n >= 1, "gauss_legendre_rule: need at least one node");
  std::vector<double> diag(n, 0.0), off(n > 0 ? n - 1 : 0);
  for (std::size_t k = 1; k < n; ++k) {
    double kk = static_cast<double>(k);
    off[k - 1] = kk * kk / (4.0 * kk * kk - 1.0);
  }
  auto rule = detail::golub_welsch(diag, off, 2.0);
  for (std::size_t i = 0; i < n; ++i) {
    rule.nodes[i] = 0.5 * (b - a) * rule.nodes[i] + 0.5 * (a + b);
    rule.weights[i] *= 0.5 * (b - a);
  }
  return rule;
}

/// Gauss rule on (0, 1) for the weight s^power, power > -1. Built from the
/// Jacobi recurrence with (1-x)^0 (1+x)^power on [-1, 1] and s = (1+x)/2.
inline QuadratureRule gauss_jacobi_unit_rule(std::size_t n, double power) {
  detail::require(n >= 1, "gauss_jacobi_unit_rule: need at least one node");
  detail::require(power > -1.0, "gauss_jacobi_unit_rule: weight exponent must exceed -1");
  const double a = 0.0, b = power;
  std::vector<double> diag(n), off(n > 0 ? n - 1 : 0);
  diag[0] = (b - a) / (a + b + 2.0);
  for (std::size_t k = 1; k < n; ++k) {
    double kk = static_cast<double>(k);
    double s = 2.0 * kk + a + b;
    diag[k] = (b * b - a * a) / (s * (s + 2.0));
    off[k - 1] = 4.0 * kk * (kk + a) * (kk + b) * (kk + a + b) / (s * s * (s + 1.0) * (s - 1.0));
  }
  double mu0 = std::pow(2.0, a + b + 1.0) * std::tgamma(a + 1.0) * std::tgamma(b + 1.0) /
               std::tgamma(a + b + 2.0);
  auto rule = detail::golub_welsch(diag, off, mu0);
  // Map to (0,1): ds = dx/2 and (1+x)^b = 2^b s^b.
  const double scale = std::pow(2.0, -(b + 1.0));
  for (std::size_t i = 0; i < n; ++i) {
    rule.nodes[i] = 0.5 * (rule.nodes[i] + 1.0);
    rule.weights[i] *= scale;
  }
  return rule;
}

/// Factorization of a Gaussian law used to push standard normal nodes
/// through z = mean + L x.
struct GaussianFactor {
  Vector mean;
  Matrix factor;  // cov = factor * factor^T
};

inline GaussianFactor factor_gaussian(const Vector& mean, const Matrix& cov) {
  detail::require(cov.rows() == cov.cols() && cov.rows() == mean.size(),
                  "gaussian: covariance shape does not match mean");
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument("gaussian: covariance is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  const Vector& lam = eig.eigenvalues();
  if (lam.size() > 0 && lam.minCoeff() < -1e-12 * scale)
    throw std::invalid_argument(detail::concat("gaussian: covariance is not PSD (min eigenvalue ",
                                               lam.minCoeff(), ")"));
  Vector root = lam.cwiseMax(0.0).cwiseSqrt();
  return {mean, eig.eigenvectors() * root.asDiagonal()};
}

/// E[g(Z)] for Z ~ N(mean, cov) by tensorized Gauss-Hermite, dimension <= 2.
/// Exact for polynomials of degree <= 2 n_nodes - 1 per axis.
template <typename F>
double gauss_hermite_expectation(F&& g, const Vector& mean, const Matrix& cov,
                                 const QuadratureRule& rule) {
  detail::require(rule.size() >= 2, "gauss_hermite_expectation: need n_nodes >= 2");
  detail::require(mean.size() >= 1 && mean.size() <= 2,
                  "gauss_hermite_expectation: dimension must be 1 or 2");
  GaussianFactor gf = factor_gaussian(mean, cov);
  const std::size_t n = rule.size();
  double acc = 0.0;
  if (mean.size() == 1) {
    Vector z(1);
    for (std::size_t i = 0; i < n; ++i) {
      z(0) = gf.mean(0) + gf.factor(0, 0) * rule.nodes[i];
      acc += rule.weights[i] * g(z);
    }
    return acc;
  }
  Vector x(2), z(2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      x << rule.nodes[i], rule.nodes[j];
      z.noalias() = gf.mean + gf.factor * x;
      acc += rule.weights[i] * rule.weights[j] * g(z);
    }
  }
  return acc;
}

template <typename F>
double gauss_hermite_expectation(F&& g, const Vector& mean, const Matrix& cov,
                                 std::size_t n_nodes) {
  return gauss_hermite_expectation(std::forward<F>(g), mean, cov, gauss_hermite_rule(n_nodes));
}

}  // namespace brinkavg
