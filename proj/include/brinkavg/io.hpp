#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "brinkavg/slowsolver.hpp"

namespace brinkavg {

inline constexpr const char* kVersion = "1.0.0";

/// Shortest-round-trip-safe formatting: 17 significant digits.
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Per-run CSV: header t,a_1..a_n,norm_H,norm_V; one row per sample.
inline void write_trajectory_csv(const Trajectory& traj, const GalerkinBasis& basis, std::ostream& out) {
  const std::size_t n = basis.n_modes();
  out << "t";
  for (std::size_t k = 1; k <= n; ++k) out << ",a_" << k;
  out << ",norm_H,norm_V\n";
  for (std::size_t s = 0; s < traj.n_samples(); ++s) {
    const Vector& a = traj.coeffs[s];
    out << fmt17(traj.times[s]);
    for (Eigen::Index k = 0; k < a.size(); ++k) out << "," << fmt17(a(k));
    out << "," << fmt17(h_norm(a)) << "," << fmt17(v_norm(basis, a)) << "\n";
  }
}

inline void write_trajectory_csv(const Trajectory& traj, const GalerkinBasis& basis,
                                 const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_trajectory_csv(traj, basis, out);
}

inline void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace brinkavg
