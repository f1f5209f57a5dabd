#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "brinkavg/basis.hpp"
#include "brinkavg/coefficient.hpp"
#include "brinkavg/fastproc.hpp"

namespace brinkavg {

using json = nlohmann::json;

/// Initial/forcing profile. Types:
///   zero       identically zero
///   modes      explicit basis coefficients
///   low_mode   e_1 + 0.5 e_2 (smooth, in V)
///   bump       amplitude * prod_d x_d (1 - x_d) per component, projected
///   equal_u0   (v0 only) copy of the slow initial data
struct ProfileSpec {
  std::string type = "zero";
  std::vector<double> coeffs;
  double amplitude = 1.0;
};

struct ForcingSpec {
  ProfileSpec profile;   // spatial shape
  double omega = 0.0;    // f(t) = cos(omega t) * profile
};

struct NoiseSpec {
  double q0 = 0.0;
  double decay_p = 3.0;
  std::vector<double> q_list;  // overrides (q0, decay_p) when non-empty
};

struct ProblemConfig {
  BasisKind basis_kind = BasisKind::scalar_sine_1d;
  std::size_t n_per_dim = 8;
  std::size_t grid_points_per_dim = 256;
  double T = 0.5;
  double dt = 1e-3;
  ProfileSpec u0{"low_mode", {}, 1.0};
  ProfileSpec v0{"zero", {}, 1.0};
  ForcingSpec forcing;
  double alpha0 = 1.0;
  std::vector<CoefficientTerm> terms;
  NoiseSpec noise;
  double epsilon = 0.1;  // used by single runs
  std::size_t gh_nodes = 20;
  std::size_t snapshot_stride = 1;
};

struct SweepSettings {
  std::vector<double> epsilons{0.2, 0.1, 0.05, 0.025};
  std::size_t n_paths = 32;
  std::uint64_t base_seed = 1;
  double delta = 0.0;  // <= 0 selects half the median error at the largest epsilon
};

struct RunConfig {
  ProblemConfig problem;
  SweepSettings sweep;
  std::string output_dir = "out";
};

namespace detail {

inline ProfileSpec parse_profile(const json& j, const std::string& fallback) {
  ProfileSpec p;
  p.type = fallback;
  if (j.is_string()) {
    p.type = j.get<std::string>();
  } else if (j.is_object()) {
    p.type = j.value("type", fallback);
    if (j.contains("coeffs")) p.coeffs = j.at("coeffs").get<std::vector<double>>();
    p.amplitude = j.value("amplitude", 1.0);
  }
  static const std::vector<std::string> known{"zero", "modes", "low_mode", "bump", "equal_u0"};
  if (std::find(known.begin(), known.end(), p.type) == known.end())
    throw std::invalid_argument("unknown profile type: " + p.type);
  return p;
}

inline json profile_to_json(const ProfileSpec& p) {
  return json{{"type", p.type}, {"coeffs", p.coeffs}, {"amplitude", p.amplitude}};
}

inline std::array<int, 2> parse_wave(const json& j) {
  std::array<int, 2> w{0, 0};
  if (j.is_number_integer()) {
    w[0] = j.get<int>();
    return w;
  }
  auto v = j.get<std::vector<int>>();
  require(!v.empty() && v.size() <= 2, "wave_vector must have 1 or 2 entries");
  for (std::size_t i = 0; i < v.size(); ++i) w[i] = v[i];
  return w;
}

}  // namespace detail

inline CoefficientTerm parse_term(const json& j) {
  CoefficientTerm t;
  const json& g = j.at("g");
  t.g = cell_function_from_string(g.at("type").get<std::string>());
  t.wave = detail::parse_wave(g.at("wave_vector"));
  t.amplitude = g.at("amplitude").get<double>();
  const json& h = j.at("h");
  t.h = fast_function_from_string(h.at("type").get<std::string>());
  if (h.contains("direction")) {
    auto d = h.at("direction").get<std::vector<double>>();
    detail::require(!d.empty() && d.size() <= 2, "h.direction must have 1 or 2 entries");
    t.direction = {d[0], d.size() > 1 ? d[1] : 0.0};
  }
  return t;
}

inline json term_to_json(const CoefficientTerm& t) {
  return json{{"g", {{"type", to_string(t.g)}, {"wave_vector", {t.wave[0], t.wave[1]}}, {"amplitude", t.amplitude}}},
              {"h", {{"type", to_string(t.h)}, {"direction", {t.direction[0], t.direction[1]}}}}};
}

/// Parses the sectioned config document:
///   problem {basis_kind, n_per_dim, grid_points_per_dim, T, dt, epsilon,
///            u0_profile, v0_profile, forcing, gh_nodes}
///   coefficient {alpha0, terms[]}
///   noise {q0, decay_p | q_list}
///   sweep {epsilons[], n_paths, base_seed, delta}
///   output {dir, snapshot_stride}
inline RunConfig parse_config(const json& doc) {
  RunConfig rc;
  ProblemConfig& p = rc.problem;
  if (doc.contains("problem")) {
    const json& j = doc.at("problem");
    if (j.contains("basis_kind")) p.basis_kind = basis_kind_from_string(j.at("basis_kind").get<std::string>());
    p.n_per_dim = j.value("n_per_dim", p.n_per_dim);
    p.grid_points_per_dim = j.value("grid_points_per_dim", p.grid_points_per_dim);
    p.T = j.value("T", p.T);
    p.dt = j.value("dt", p.dt);
    p.epsilon = j.value("epsilon", p.epsilon);
    p.gh_nodes = j.value("gh_nodes", p.gh_nodes);
    if (j.contains("u0_profile")) p.u0 = detail::parse_profile(j.at("u0_profile"), "low_mode");
    if (j.contains("v0_profile")) p.v0 = detail::parse_profile(j.at("v0_profile"), "zero");
    if (j.contains("forcing")) {
      const json& f = j.at("forcing");
      p.forcing.profile = detail::parse_profile(f.is_object() && f.contains("profile") ? f.at("profile") : f, "zero");
      if (f.is_object()) p.forcing.omega = f.value("omega", 0.0);
    }
  }
  if (doc.contains("coefficient")) {
    const json& j = doc.at("coefficient");
    p.alpha0 = j.value("alpha0", p.alpha0);
    if (j.contains("terms"))
      for (const auto& t : j.at("terms")) p.terms.push_back(parse_term(t));
  }
  if (doc.contains("noise")) {
    const json& j = doc.at("noise");
    p.noise.q0 = j.value("q0", p.noise.q0);
    p.noise.decay_p = j.value("decay_p", p.noise.decay_p);
    if (j.contains("q_list")) p.noise.q_list = j.at("q_list").get<std::vector<double>>();
  }
  if (doc.contains("sweep")) {
    const json& j = doc.at("sweep");
    if (j.contains("epsilons")) rc.sweep.epsilons = j.at("epsilons").get<std::vector<double>>();
    rc.sweep.n_paths = j.value("n_paths", rc.sweep.n_paths);
    rc.sweep.base_seed = j.value("base_seed", rc.sweep.base_seed);
    rc.sweep.delta = j.value("delta", rc.sweep.delta);
  }
  if (doc.contains("output")) {
    const json& j = doc.at("output");
    rc.output_dir = j.value("dir", rc.output_dir);
    p.snapshot_stride = j.value("snapshot_stride", p.snapshot_stride);
  }
  detail::require(p.T > 0.0 && p.dt > 0.0, "config: T and dt must be positive");
  detail::require(p.snapshot_stride >= 1, "config: snapshot_stride must be >= 1");
  return rc;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path.string());
  json doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  return parse_config(doc);
}

inline json to_json(const RunConfig& rc) {
  const ProblemConfig& p = rc.problem;
  json terms = json::array();
  for (const auto& t : p.terms) terms.push_back(term_to_json(t));
  json noise{{"q0", p.noise.q0}, {"decay_p", p.noise.decay_p}};
  if (!p.noise.q_list.empty()) noise["q_list"] = p.noise.q_list;
  return json{
      {"problem",
       {{"basis_kind", to_string(p.basis_kind)},
        {"n_per_dim", p.n_per_dim},
        {"grid_points_per_dim", p.grid_points_per_dim},
        {"T", p.T},
        {"dt", p.dt},
        {"epsilon", p.epsilon},
        {"gh_nodes", p.gh_nodes},
        {"u0_profile", detail::profile_to_json(p.u0)},
        {"v0_profile", detail::profile_to_json(p.v0)},
        {"forcing", {{"profile", detail::profile_to_json(p.forcing.profile)}, {"omega", p.forcing.omega}}}}},
      {"coefficient", {{"alpha0", p.alpha0}, {"terms", terms}}},
      {"noise", noise},
      {"sweep",
       {{"epsilons", rc.sweep.epsilons},
        {"n_paths", rc.sweep.n_paths},
        {"base_seed", rc.sweep.base_seed},
        {"delta", rc.sweep.delta}}},
      {"output", {{"dir", rc.output_dir}, {"snapshot_stride", p.snapshot_stride}}}};
}

/// Stable hash of the canonical config (output directory excluded).
inline std::string config_hash(const RunConfig& rc) {
  json j = to_json(rc);
  j["output"].erase("dir");
  return detail::hex64(detail::fnv1a(j.dump()));
}

/// Everything a simulation needs, materialized from a ProblemConfig.
struct Problem {
  ProblemConfig config;
  GalerkinBasis basis;
  CoefficientSpec coefficient;
  NoiseModel noise;
  Vector u0;
  Vector v0;
  Vector forcing_shape;

  Vector forcing(double t) const {
    if (config.forcing.omega == 0.0) return forcing_shape;
    return std::cos(config.forcing.omega * t) * forcing_shape;
  }
  bool unforced() const { return forcing_shape.isZero(0.0); }
  std::size_t n_steps() const { return static_cast<std::size_t>(std::llround(config.T / config.dt)); }
};

inline Vector profile_coefficients(const ProfileSpec& spec, const GalerkinBasis& basis,
                                   const Vector* u0 = nullptr) {
  const auto n = static_cast<Eigen::Index>(basis.n_modes());
  Vector c = Vector::Zero(n);
  if (spec.type == "zero") return c;
  if (spec.type == "modes") {
    detail::require(static_cast<Eigen::Index>(spec.coeffs.size()) <= n,
                    "profile: more coefficients than basis modes");
    for (std::size_t k = 0; k < spec.coeffs.size(); ++k) c(static_cast<Eigen::Index>(k)) = spec.coeffs[k];
    return c;
  }
  if (spec.type == "low_mode") {
    c(0) = spec.amplitude;
    if (n > 1) c(1) = 0.5 * spec.amplitude;
    return c;
  }
  if (spec.type == "bump") {
    const std::size_t d = basis.dim();
    double amp = spec.amplitude;
    GridField f = basis.sample([d, amp](const double* x, std::size_t) {
      double v = amp;
      for (std::size_t i = 0; i < d; ++i) v *= x[i] * (1.0 - x[i]);
      return v;
    });
    return basis.project(f);
  }
  if (spec.type == "equal_u0") {
    detail::require(u0 != nullptr, "profile equal_u0 is only valid for v0");
    return *u0;
  }
  throw std::invalid_argument("unknown profile type: " + spec.type);
}

inline NoiseModel make_noise(const NoiseSpec& spec, const GalerkinBasis& basis) {
  if (!spec.q_list.empty()) {
    detail::require(spec.q_list.size() == basis.n_modes(),
                    detail::concat("noise: q_list has ", spec.q_list.size(), " entries, basis has ",
                                   basis.n_modes(), " modes"));
    return NoiseModel(Eigen::Map<const Vector>(spec.q_list.data(), static_cast<Eigen::Index>(spec.q_list.size())));
  }
  if (spec.q0 == 0.0) return NoiseModel::zero(basis.n_modes());
  return NoiseModel::from_decay(basis, spec.q0, spec.decay_p);
}

inline Problem make_problem(const ProblemConfig& cfg) {
  GalerkinBasis basis(cfg.basis_kind, cfg.n_per_dim, cfg.grid_points_per_dim);
  CoefficientSpec coef(cfg.alpha0, cfg.terms, basis.dim(), basis.components());
  NoiseModel noise = make_noise(cfg.noise, basis);
  Vector u0 = profile_coefficients(cfg.u0, basis);
  Vector v0 = profile_coefficients(cfg.v0, basis, &u0);
  Vector f = profile_coefficients(cfg.forcing.profile, basis);
  return Problem{cfg, std::move(basis), std::move(coef), std::move(noise), std::move(u0), std::move(v0), std::move(f)};
}

}  // namespace brinkavg
