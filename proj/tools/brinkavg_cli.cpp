#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "brinkavg/brinkavg.hpp"

using namespace brinkavg;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

json run_manifest(const RunConfig& rc, const std::string& kind, double eps, std::uint64_t seed, double wall) {
  return json{{"kind", kind},
              {"config_hash", config_hash(rc)},
              {"version", kVersion},
              {"epsilon", eps},
              {"seed", seed},
              {"n_modes", rc.problem.n_per_dim},
              {"wall_time_seconds", wall},
              {"config", to_json(rc)}};
}

int cmd_simulate(const std::string& config, std::uint64_t seed, const std::string& out, double eps_override) {
  const auto start = std::chrono::steady_clock::now();
  RunConfig rc = load_config(config);
  const double eps = eps_override > 0.0 ? eps_override : rc.problem.epsilon;
  Problem prob = make_problem(rc.problem);
  Trajectory traj = simulate_coupled(prob, eps, seed);
  std::filesystem::create_directories(out);
  write_trajectory_csv(traj, prob.basis, std::filesystem::path(out) / "trajectory.csv");
  write_json(run_manifest(rc, "simulate", eps, seed, seconds_since(start)), std::filesystem::path(out) / "manifest.json");
  std::cout << "simulate: eps=" << eps << " seed=" << seed << " samples=" << traj.n_samples()
            << " final ||u||_H=" << traj.norm_h.back() << " -> " << out << "\n";
  return 0;
}

int cmd_averaged(const std::string& config, const std::string& out, bool picard) {
  const auto start = std::chrono::steady_clock::now();
  RunConfig rc = load_config(config);
  Problem prob = make_problem(rc.problem);
  AveragedOptions opts;
  opts.picard = picard;
  AveragedRun run = solve_averaged(prob, opts);
  std::filesystem::create_directories(out);
  write_trajectory_csv(run.trajectory, prob.basis, std::filesystem::path(out) / "trajectory.csv");
  json m = run_manifest(rc, "averaged", 0.0, 0, seconds_since(start));
  m["picard"] = picard;
  m["max_picard_iterations"] = run.max_picard_iterations;
  write_json(m, std::filesystem::path(out) / "manifest.json");
  std::cout << "averaged: samples=" << run.trajectory.n_samples() << " final ||u||_H=" << run.trajectory.norm_h.back()
            << " -> " << out << "\n";
  return 0;
}

int cmd_sweep(const std::string& config, std::string out, std::size_t workers) {
  RunConfig rc = load_config(config);
  if (out.empty()) out = rc.output_dir;
  SweepReport rep = convergence_sweep(rc, workers);
  write_sweep_outputs(rep, out, workers);
  std::cout << render_report(rep) << "wall time " << rep.runtime_seconds << " s -> " << out << "\n";
  return 0;
}

int cmd_validate(const std::string& suite) {
  std::vector<std::string> suites;
  if (suite == "all")
    suites = validation_suites();
  else
    suites = {suite};
  bool ok = true;
  json all = json::array();
  for (const auto& name : suites) {
    ValidationSummary s = validate(name);
    ok = ok && s.passed();
    all.push_back(s.to_json());
  }
  std::cout << (all.size() == 1 ? all[0] : all).dump(2) << "\n";
  return ok ? 0 : 1;
}

int cmd_psi_check(const std::string& config, double eps_override) {
  RunConfig rc = load_config(config);
  Problem prob = make_problem(rc.problem);
  const double eps = eps_override > 0.0 ? eps_override : rc.problem.epsilon;
  const Vector phi = default_test_function(prob.basis);
  json rows = json::array();
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (double c : {1.0, 0.1, 0.01}) {
    double v = resolvent_psi_rate(prob.coefficient, prob.basis, prob.noise, prob.v0, prob.u0, phi, eps, c);
    rows.push_back({{"c", c}, {"psi", v}});
    lo = std::min(lo, std::abs(v));
    hi = std::max(hi, std::abs(v));
  }
  const double ratio = lo > 0.0 ? hi / lo : (hi == 0.0 ? 1.0 : std::numeric_limits<double>::infinity());
  const double at_default = resolvent_psi(prob.coefficient, prob.basis, prob.noise, prob.v0, prob.u0, phi, eps);
  json j{{"epsilon", eps},
         {"default_rate", resolvent_rate(eps)},
         {"psi_default_rate", at_default},
         {"ladder", rows},
         {"max_over_min", ratio},
         {"bounded", ratio < 5.0}};
  std::cout << j.dump(2) << "\n";
  return ratio < 5.0 ? 0 : 1;
}

int cmd_report(const std::string& in, const std::string& out, double delta) {
  SweepReport rep = read_sweep_csv(std::filesystem::path(in) / "sweep.csv", delta);
  const std::string text = render_report(rep);
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot write " + out);
    f << text;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"brinkavg: slow-fast stochastic Brinkman simulator and averaging harness"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string config, out, in, suite = "all";
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  double eps = 0.0, delta = 0.0;
  bool picard = false;

  auto* sim = app.add_subcommand("simulate", "one coupled slow-fast run");
  sim->add_option("--config", config, "config file")->required()->check(CLI::ExistingFile);
  sim->add_option("--seed", seed, "path seed");
  sim->add_option("--out", out, "output directory")->required();
  sim->add_option("--epsilon", eps, "override problem.epsilon");

  auto* avg = app.add_subcommand("averaged", "deterministic averaged equation");
  avg->add_option("--config", config, "config file")->required()->check(CLI::ExistingFile);
  avg->add_option("--out", out, "output directory")->required();
  avg->add_flag("--picard", picard, "iterate each step to convergence instead of lagging the coefficient");

  auto* sw = app.add_subcommand("sweep", "epsilon ladder with path ensembles");
  sw->add_option("--config", config, "config file")->required()->check(CLI::ExistingFile);
  sw->add_option("--out", out, "output directory (defaults to output.dir)");
  sw->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);

  auto* val = app.add_subcommand("validate", "built-in invariant suites");
  val->add_option("--suite", suite, "basis, quadrature, ou, energy, averaging, psi or all");

  auto* psi = app.add_subcommand("psi-check", "resolvent bound over the rate ladder c = 1, 0.1, 0.01");
  psi->add_option("--config", config, "config file")->required()->check(CLI::ExistingFile);
  psi->add_option("--epsilon", eps, "override problem.epsilon");

  auto* rep = app.add_subcommand("report", "markdown report from a sweep directory");
  rep->add_option("--in", in, "sweep output directory")->required()->check(CLI::ExistingDirectory);
  rep->add_option("--out", out, "report file ('-' for stdout)");
  rep->add_option("--delta", delta, "probability threshold (default: half the largest-epsilon median)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*sim) return cmd_simulate(config, seed, out, eps);
    if (*avg) return cmd_averaged(config, out, picard);
    if (*sw) return cmd_sweep(config, out, workers);
    if (*val) return cmd_validate(suite);
    if (*psi) return cmd_psi_check(config, eps);
    if (*rep) return cmd_report(in, out, delta);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
