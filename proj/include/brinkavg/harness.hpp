#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "brinkavg/averaging.hpp"
#include "brinkavg/config.hpp"
#include "brinkavg/io.hpp"
#include "brinkavg/slowsolver.hpp"

namespace brinkavg {

using TimeWeight = std::function<double(double)>;

/// psi(t) = 1 - t/T.
inline TimeWeight default_time_weight(double T) {
  return [T](double t) { return 1.0 - t / T; };
}

/// Lowest basis mode.
inline Vector default_test_function(const GalerkinBasis& basis) {
  Vector phi = Vector::Zero(static_cast<Eigen::Index>(basis.n_modes()));
  phi(0) = 1.0;
  return phi;
}

namespace detail {
// Trapezoid rule over the sample times.
inline double trapezoid(const std::vector<double>& t, const std::vector<double>& y) {
  double acc = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i) acc += 0.5 * (t[i] - t[i - 1]) * (y[i] + y[i - 1]);
  return acc;
}
}  // namespace detail

/// Shared read-only state for the decomposition diagnostics at one epsilon.
class DiagnosticContext {
 public:
  DiagnosticContext(const Problem& prob, double eps, const Vector& phi, TimeWeight psi)
      : prob_(&prob),
        resc_(prob.coefficient, prob.basis, eps),
        avg_(prob.coefficient, prob.basis, prob.noise, prob.config.gh_nodes),
        phi_grid_(prob.basis.evaluate(phi)),
        psi_(std::move(psi)) {}

  DiagnosticContext(const Problem& prob, double eps)
      : DiagnosticContext(prob, eps, default_test_function(prob.basis), default_time_weight(prob.config.T)) {}

  double eps() const { return resc_.eps(); }

  /// S1 = int_0^T psi int_D (alpha_eps(v) - abar_eps(u)) <u, phi> dx dt.
  double s1(const Trajectory& traj) const {
    if (!traj.has_fast()) throw std::invalid_argument("s1_diagnostic: trajectory has no fast snapshots");
    const GalerkinBasis& basis = prob_->basis;
    std::vector<double> integrand(traj.n_samples());
    for (std::size_t s = 0; s < traj.n_samples(); ++s) {
      const GridField u = basis.evaluate(traj.coeffs[s]);
      const GridField v = basis.evaluate(traj.fast[s]);
      const Vector a_eps = resc_.on_grid(v);
      const Vector a_bar_eps = avg_.alpha_bar_eps_from(avg_.term_expectations(u), resc_);
      integrand[s] = psi_(traj.times[s]) * spatial(a_eps - a_bar_eps, u);
    }
    return detail::trapezoid(traj.times, integrand);
  }

  /// S3 = int_0^T psi int_D (abar_eps(ubar) - abar(ubar)) <ubar, phi> dx dt.
  double s3(const Trajectory& ubar) const {
    const GalerkinBasis& basis = prob_->basis;
    std::vector<double> integrand(ubar.n_samples());
    for (std::size_t s = 0; s < ubar.n_samples(); ++s) {
      const GridField u = basis.evaluate(ubar.coeffs[s]);
      const Matrix ex = avg_.term_expectations(u);
      const Vector diff = avg_.alpha_bar_eps_from(ex, resc_) - avg_.alpha_bar_from(ex);
      integrand[s] = psi_(ubar.times[s]) * spatial(diff, u);
    }
    return detail::trapezoid(ubar.times, integrand);
  }

 private:
  double spatial(const Vector& coef, const GridField& u) const {
    const Vector u_phi = (u.array() * phi_grid_.array()).rowwise().sum().matrix();
    return prob_->basis.weight() * (coef.array() * u_phi.array()).sum();
  }

  const Problem* prob_;
  RescaledCoefficient resc_;
  GaussianAverager avg_;
  GridField phi_grid_;
  TimeWeight psi_;
};

inline double s1_diagnostic(const Trajectory& traj, const Problem& prob, double eps, const Vector& phi,
                            TimeWeight psi) {
  return DiagnosticContext(prob, eps, phi, std::move(psi)).s1(traj);
}

inline double s3_diagnostic(const Trajectory& ubar, const Problem& prob, double eps, const Vector& phi,
                            TimeWeight psi) {
  return DiagnosticContext(prob, eps, phi, std::move(psi)).s3(ubar);
}

/// (int_0^T ||u - ubar||_V^2 dt)^{1/2} by the trapezoid rule over samples.
inline double l2v_error(const Trajectory& u, const Trajectory& ubar, const GalerkinBasis& basis) {
  detail::require(u.n_samples() == ubar.n_samples(), "error: trajectories have different sample counts");
  std::vector<double> e2(u.n_samples());
  for (std::size_t s = 0; s < u.n_samples(); ++s) {
    detail::require(u.times[s] == ubar.times[s], "error: trajectories sampled at different times");
    double v = v_norm(basis, u.coeffs[s] - ubar.coeffs[s]);
    e2[s] = v * v;
  }
  return std::sqrt(detail::trapezoid(u.times, e2));
}

class PathFailure : public std::runtime_error {
 public:
  PathFailure(const std::string& what, std::size_t path) : std::runtime_error(what), path_(path) {}
  std::size_t path() const { return path_; }

 private:
  std::size_t path_;
};

/// Runs fn(i) for i in [0, n) on `workers` threads. Exceptions are rethrown
/// for the lowest failing index.
inline void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  std::vector<std::exception_ptr> errors(n);
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    for (auto& t : pool) t.join();
  }
  for (std::size_t i = 0; i < n; ++i)
    if (errors[i]) {
      try {
        std::rethrow_exception(errors[i]);
      } catch (const std::exception& e) {
        throw PathFailure(detail::concat("path ", i, ": ", e.what()), i);
      }
    }
}

struct PathResult {
  std::size_t path = 0;
  double error = 0.0;
  double s1 = 0.0;
};

/// Error samples of the coupled run against ubar for paths 0..n_paths-1,
/// ordered by path index. Path i draws from stream (base_seed, i).
inline std::vector<PathResult> run_ensemble(const Problem& prob, double eps, std::size_t n_paths,
                                            std::uint64_t base_seed, const Trajectory& ubar,
                                            std::size_t workers = 1, const DiagnosticContext* diag = nullptr) {
  std::vector<PathResult> out(n_paths);
  parallel_for(n_paths, workers, [&](std::size_t i) {
    Rng rng = Rng::stream(base_seed, i, StreamTag::fast_noise);
    Trajectory traj = simulate_coupled(prob, eps, rng);
    double err = l2v_error(traj, ubar, prob.basis);
    if (!std::isfinite(err)) throw SimulationAbort("non-finite error", 0);
    out[i] = PathResult{i, err, diag ? diag->s1(traj) : 0.0};
  });
  return out;
}

inline double median(std::vector<double> v) {
  detail::require(!v.empty(), "median of empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double quantile(std::vector<double> v, double q) {
  detail::require(!v.empty(), "quantile of empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct EpsilonRow {
  double epsilon = 0.0;
  std::vector<PathResult> paths;
  double median_error = 0.0;
  double mean_error = 0.0;
  double p_exceed = 0.0;
  double median_abs_s1 = 0.0;
  double s3 = 0.0;
};

struct SweepChecks {
  bool evaluated = false;  // false for single-epsilon ladders
  bool median_decreasing = false;
  bool probability_nonincreasing = false;
  bool probability_zero_at_smallest = false;
  bool s1_decreasing = false;
  bool s3_decreasing = false;
  double s3_ratio = 0.0;  // |S3(smallest eps)| / |S3(largest eps)|
};

struct SweepReport {
  std::string config_hash;
  std::uint64_t base_seed = 0;
  std::size_t n_paths = 0;
  double delta = 0.0;
  std::vector<EpsilonRow> rows;
  SweepChecks checks;
  double runtime_seconds = 0.0;
};

inline void validate_sweep(const RunConfig& rc, const GalerkinBasis& basis) {
  const auto& eps = rc.sweep.epsilons;
  detail::require(!eps.empty(), "sweep: empty epsilon list");
  for (std::size_t i = 0; i < eps.size(); ++i) {
    detail::require(eps[i] > 0.0, "sweep: epsilons must be positive");
    if (i > 0) detail::require(eps[i] < eps[i - 1], "sweep: epsilons must be strictly decreasing");
  }
  detail::require(rc.sweep.n_paths >= 8, "sweep: n_paths must be >= 8");
  check_resolution(basis, eps.back());
}

/// Aggregates per-path results into rows and ladder checks. Depends only on
/// the multiset of path results per epsilon.
inline void summarize(SweepReport& rep, double delta_config) {
  if (rep.rows.empty()) return;
  for (auto& row : rep.rows) {
    std::sort(row.paths.begin(), row.paths.end(),
              [](const PathResult& a, const PathResult& b) { return a.path < b.path; });
    std::vector<double> e, s1;
    for (const auto& p : row.paths) {
      e.push_back(p.error);
      s1.push_back(std::abs(p.s1));
    }
    row.median_error = median(e);
    double sum = 0.0;
    for (double x : e) sum += x;
    row.mean_error = sum / static_cast<double>(e.size());
    row.median_abs_s1 = median(s1);
  }
  rep.delta = delta_config > 0.0 ? delta_config : 0.5 * rep.rows.front().median_error;
  for (auto& row : rep.rows) {
    std::size_t over = 0;
    for (const auto& p : row.paths) over += p.error > rep.delta ? 1 : 0;
    row.p_exceed = static_cast<double>(over) / static_cast<double>(row.paths.size());
  }
  SweepChecks& c = rep.checks;
  c = SweepChecks{};
  if (rep.rows.size() < 2) return;
  c.evaluated = true;
  c.median_decreasing = c.probability_nonincreasing = c.s1_decreasing = c.s3_decreasing = true;
  for (std::size_t i = 1; i < rep.rows.size(); ++i) {
    const auto& a = rep.rows[i - 1];
    const auto& b = rep.rows[i];
    c.median_decreasing = c.median_decreasing && b.median_error < a.median_error;
    c.probability_nonincreasing = c.probability_nonincreasing && b.p_exceed <= a.p_exceed;
    c.s1_decreasing = c.s1_decreasing && b.median_abs_s1 < a.median_abs_s1;
    c.s3_decreasing = c.s3_decreasing && std::abs(b.s3) < std::abs(a.s3);
  }
  c.probability_zero_at_smallest = rep.rows.back().p_exceed == 0.0;
  const double s3_first = std::abs(rep.rows.front().s3);
  c.s3_ratio = s3_first > 0.0 ? std::abs(rep.rows.back().s3) / s3_first : 0.0;
}

/// Full epsilon ladder: ubar once, then an ensemble and diagnostics per epsilon.
inline SweepReport convergence_sweep(const RunConfig& rc, std::size_t workers = 1) {
  const auto start = std::chrono::steady_clock::now();
  Problem prob = make_problem(rc.problem);
  validate_sweep(rc, prob.basis);
  const Trajectory ubar = solve_averaged(prob).trajectory;
  SweepReport rep;
  rep.config_hash = config_hash(rc);
  rep.base_seed = rc.sweep.base_seed;
  rep.n_paths = rc.sweep.n_paths;
  for (double eps : rc.sweep.epsilons) {
    DiagnosticContext diag(prob, eps);
    EpsilonRow row;
    row.epsilon = eps;
    row.paths = run_ensemble(prob, eps, rc.sweep.n_paths, rc.sweep.base_seed, ubar, workers, &diag);
    row.s3 = diag.s3(ubar);
    rep.rows.push_back(std::move(row));
  }
  summarize(rep, rc.sweep.delta);
  rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

/// sweep.csv: epsilon,path,error,s1,s3
inline void write_sweep_csv(const SweepReport& rep, std::ostream& out) {
  out << "epsilon,path,error,s1,s3\n";
  for (const auto& row : rep.rows)
    for (const auto& p : row.paths)
      out << fmt17(row.epsilon) << "," << p.path << "," << fmt17(p.error) << "," << fmt17(p.s1) << ","
          << fmt17(row.s3) << "\n";
}

/// summary.csv: epsilon,n_paths,median_error,mean_error,p_exceed,median_abs_s1,s3
inline void write_summary_csv(const SweepReport& rep, std::ostream& out) {
  out << "epsilon,n_paths,median_error,mean_error,p_exceed,median_abs_s1,s3\n";
  for (const auto& row : rep.rows)
    out << fmt17(row.epsilon) << "," << row.paths.size() << "," << fmt17(row.median_error) << ","
        << fmt17(row.mean_error) << "," << fmt17(row.p_exceed) << "," << fmt17(row.median_abs_s1) << ","
        << fmt17(row.s3) << "\n";
}

inline nlohmann::json checks_to_json(const SweepChecks& c) {
  if (!c.evaluated) return nlohmann::json{{"evaluated", false}};
  return nlohmann::json{{"evaluated", true},
                        {"median_decreasing", c.median_decreasing},
                        {"probability_nonincreasing", c.probability_nonincreasing},
                        {"probability_zero_at_smallest", c.probability_zero_at_smallest},
                        {"s1_median_decreasing", c.s1_decreasing},
                        {"s3_decreasing", c.s3_decreasing},
                        {"s3_ratio", c.s3_ratio}};
}

inline void write_sweep_outputs(const SweepReport& rep, const std::filesystem::path& dir,
                                std::size_t workers) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "sweep.csv");
    write_sweep_csv(rep, out);
  }
  {
    std::ofstream out(dir / "summary.csv");
    write_summary_csv(rep, out);
  }
  std::vector<double> eps;
  for (const auto& r : rep.rows) eps.push_back(r.epsilon);
  write_json(nlohmann::json{{"config_hash", rep.config_hash},
                            {"version", kVersion},
                            {"base_seed", rep.base_seed},
                            {"n_paths", rep.n_paths},
                            {"epsilons", eps},
                            {"delta", rep.delta},
                            {"workers", workers},
                            {"checks", checks_to_json(rep.checks)},
                            {"wall_time_seconds", rep.runtime_seconds}},
             dir / "manifest.json");
}

/// Rebuilds a report from a sweep.csv file (used by `report`).
inline SweepReport read_sweep_csv(const std::filesystem::path& path, double delta = 0.0) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  detail::require(line == "epsilon,path,error,s1,s3", "sweep.csv: unexpected header '" + line + "'");
  SweepReport rep;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    detail::require(cells.size() == 5, "sweep.csv: malformed row");
    const double eps = std::stod(cells[0]);
    if (rep.rows.empty() || rep.rows.back().epsilon != eps) {
      rep.rows.push_back(EpsilonRow{});
      rep.rows.back().epsilon = eps;
      rep.rows.back().s3 = std::stod(cells[4]);
    }
    rep.rows.back().paths.push_back(PathResult{std::stoul(cells[1]), std::stod(cells[2]), std::stod(cells[3])});
  }
  if (!rep.rows.empty()) rep.n_paths = rep.rows.front().paths.size();
  summarize(rep, delta);
  return rep;
}

inline std::string render_report(const SweepReport& rep) {
  std::ostringstream os;
  os << "# Epsilon sweep\n\n";
  os << "delta = " << fmt17(rep.delta) << "\n\n";
  os << "| epsilon | paths | median error | mean error | P(error > delta) | median abs S1 | S3 |\n";
  os << "|---|---|---|---|---|---|---|\n";
  for (const auto& r : rep.rows)
    os << "| " << r.epsilon << " | " << r.paths.size() << " | " << r.median_error << " | " << r.mean_error << " | "
       << r.p_exceed << " | " << r.median_abs_s1 << " | " << r.s3 << " |\n";
  os << "\n";
  const auto& c = rep.checks;
  if (!c.evaluated) {
    os << "Single epsilon: no ladder checks.\n";
  } else {
    auto yn = [](bool b) { return b ? "yes" : "no"; };
    os << "- median error strictly decreasing: " << yn(c.median_decreasing) << "\n";
    os << "- P(error > delta) non-increasing: " << yn(c.probability_nonincreasing) << "\n";
    os << "- P(error > delta) = 0 at smallest epsilon: " << yn(c.probability_zero_at_smallest) << "\n";
    os << "- median |S1| decreasing: " << yn(c.s1_decreasing) << "\n";
    os << "- |S3| decreasing: " << yn(c.s3_decreasing) << " (ratio " << c.s3_ratio << ")\n";
  }
  return os.str();
}

}  // namespace brinkavg
