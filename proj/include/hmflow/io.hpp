#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hmflow/decomposition.hpp"
#include "hmflow/flow.hpp"
#include "hmflow/grid.hpp"
#include "hmflow/profile.hpp"

namespace hmflow {

// Profiles are stored as plain text: '#'-prefixed header lines carrying the
// equivariance/sector metadata, then two columns (r, u) at full precision.
inline void write_profile(std::ostream& os, const RadialProfile& u,
                          const std::string& origin = "") {
  os << "# hmflow radial profile\n";
  os << "# k " << u.k << "\n";
  os << "# ell " << u.ell << "\n";
  os << "# m " << u.m << "\n";
  os << "# n " << u.size() << "\n";
  if (!origin.empty()) os << "# origin " << origin << "\n";
  os << std::setprecision(17) << std::scientific;
  for (std::size_t i = 0; i < u.size(); ++i)
    os << u.grid.r(i) << " " << u.values[i] << "\n";
}

inline void write_profile(const std::filesystem::path& path, const RadialProfile& u,
                          const std::string& origin = "") {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  write_profile(os, u, origin);
}

inline RadialProfile read_profile(std::istream& is) {
  RadialProfile u;
  u.k = 1;
  std::vector<double> rs, vs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string key;
      hs >> key;
      if (key == "k")
        hs >> u.k;
      else if (key == "ell")
        hs >> u.ell;
      else if (key == "m")
        hs >> u.m;
      continue;
    }
    std::istringstream ls(line);
    double r, v;
    if (!(ls >> r >> v))
      throw std::runtime_error("profile parse error at line " +
                               std::to_string(lineno) + ": '" + line + "'");
    rs.push_back(r);
    vs.push_back(v);
  }
  if (rs.size() < 2) throw std::runtime_error("profile has fewer than 2 nodes");
  std::vector<double> ss(rs.size());
  for (std::size_t i = 0; i < rs.size(); ++i) {
    if (!(rs[i] > 0.0))
      throw std::runtime_error("profile radii must be positive");
    ss[i] = std::log(rs[i]);
  }
  u.grid = RadialGrid(std::move(ss));
  u.values = std::move(vs);
  u.check();
  return u;
}

inline RadialProfile read_profile(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open profile: " + path.string());
  return read_profile(is);
}

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline void write_ledger_csv(const std::filesystem::path& path,
                             const EnergyLedger& ledger) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os << "t,energy,dissipation,residual,dt,n_nodes\n";
  for (const auto& row : ledger.rows)
    os << detail::fmt(row.t) << "," << detail::fmt(row.energy) << ","
       << detail::fmt(row.dissipation) << "," << detail::fmt(row.residual) << ","
       << detail::fmt(row.dt) << "," << row.n_nodes << "\n";
}

inline void write_track_csv(const std::filesystem::path& path,
                            const std::vector<TrackPoint>& series) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  std::size_t M = 0;
  for (const auto& tp : series) M = std::max(M, tp.lambdas.size());
  os << "t,d,error_norm,ortho_residual_max,tension_l2_sq,ok";
  for (std::size_t j = 0; j < M; ++j) os << ",lambda" << (j + 1);
  os << "\n";
  for (const auto& tp : series) {
    os << detail::fmt(tp.t) << "," << detail::fmt(tp.d) << ","
       << detail::fmt(tp.error_norm) << "," << detail::fmt(tp.ortho_residual_max)
       << "," << detail::fmt(tp.tension_l2_sq) << "," << (tp.ok ? 1 : 0);
    for (std::size_t j = 0; j < M; ++j)
      os << "," << (j < tp.lambdas.size() ? detail::fmt(tp.lambdas[j]) : "");
    os << "\n";
  }
}

inline void write_collisions_csv(const std::filesystem::path& path,
                                 const CollisionReport& rep) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os << "a,b,K,duration_ratio,inf_lamK2_tension2\n";
  for (const auto& iv : rep.intervals)
    os << detail::fmt(iv.a) << "," << detail::fmt(iv.b) << "," << iv.K << ","
       << detail::fmt(iv.duration_ratio) << ","
       << detail::fmt(iv.inf_lamK2_tension2) << "\n";
}

// On-disk layout of a simulation run:
//   <dir>/config.txt       the resolved configuration (round-trippable)
//   <dir>/ledger.csv       energy ledger
//   <dir>/termination.txt  status + blow-up estimates
//   <dir>/checkpoints/checkpoint_<idx>.txt
inline void write_trajectory(const std::filesystem::path& dir,
                             const FlowResult& res,
                             const std::string& config_text) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "checkpoints");
  {
    std::ofstream os(dir / "config.txt");
    os << config_text;
  }
  write_ledger_csv(dir / "ledger.csv", res.ledger);
  {
    std::ofstream os(dir / "termination.txt");
    os << "status " << to_string(res.termination.status) << "\n";
    os << "t_final " << detail::fmt(res.termination.t_final) << "\n";
    os << "steps " << res.termination.steps << "\n";
    os << "T_plus " << detail::fmt(res.termination.T_plus) << "\n";
    os << "eps0 " << detail::fmt(res.termination.eps0) << "\n";
    os << "consecutive_hits " << res.termination.consecutive_hits << "\n";
    os << "concentration_history";
    for (const auto& [t, sc] : res.termination.concentration_history)
      os << " " << detail::fmt(t) << ":" << detail::fmt(sc);
    os << "\n";
  }
  std::size_t idx = 0;
  for (const auto& cp : res.trajectory) {
    std::ostringstream name;
    name << "checkpoint_" << std::setw(5) << std::setfill('0') << idx++ << ".txt";
    std::ofstream os(dir / "checkpoints" / name.str());
    os << "# t " << detail::fmt(cp.t) << "\n";
    os << "# tension_l2_sq " << detail::fmt(cp.tension_l2_sq) << "\n";
    os << "# inner_scale " << detail::fmt(cp.inner_scale) << "\n";
    os << "# cum_dissipation " << detail::fmt(cp.cum_dissipation) << "\n";
    write_profile(os, cp.profile);
  }
}

inline std::vector<Checkpoint> read_trajectory_checkpoints(
    const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir / "checkpoints"))
    if (e.path().extension() == ".txt") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<Checkpoint> out;
  for (const auto& p : files) {
    std::ifstream is(p);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + p.string());
    Checkpoint cp;
    // Scalar metadata rides in extra header lines before the profile header.
    std::string line;
    std::streampos pos = is.tellg();
    while (std::getline(is, line) && !line.empty() && line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string key;
      hs >> key;
      if (key == "t")
        hs >> cp.t;
      else if (key == "tension_l2_sq")
        hs >> cp.tension_l2_sq;
      else if (key == "inner_scale")
        hs >> cp.inner_scale;
      else if (key == "cum_dissipation")
        hs >> cp.cum_dissipation;
      pos = is.tellg();
    }
    is.clear();
    is.seekg(0);
    cp.profile = read_profile(is);
    out.push_back(std::move(cp));
  }
  return out;
}

}  // namespace hmflow
