#pragma once

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hmflow/bubbles.hpp"
#include "hmflow/flow.hpp"
#include "hmflow/grid.hpp"
#include "hmflow/io.hpp"
#include "hmflow/profile.hpp"

namespace hmflow {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat key=value configuration with dotted namespaces. Unknown keys are
// rejected with the offending line; values are validated when materialized.
class Config {
 public:
  static Config parse(std::istream& is, const std::string& source = "<input>") {
    Config cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto strip = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return std::string{};
        const auto b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
      };
      line = strip(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(source + ":" + std::to_string(lineno) +
                          ": expected key=value, got '" + line + "'");
      const std::string key = strip(line.substr(0, eq));
      const std::string val = strip(line.substr(eq + 1));
      if (key.empty())
        throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
      if (cfg.kv_.count(key))
        throw ConfigError(source + ":" + std::to_string(lineno) +
                          ": duplicate key '" + key + "'");
      cfg.kv_[key] = val;
      cfg.lines_[key] = lineno;
      cfg.source_ = source;
    }
    return cfg;
  }

  static Config parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    return parse(is, path);
  }

  // Apply command-line key=value overrides on top of file contents.
  void override_with(const std::vector<std::string>& pairs) {
    for (const auto& p : pairs) {
      const auto eq = p.find('=');
      if (eq == std::string::npos)
        throw ConfigError("override '" + p + "': expected key=value");
      kv_[p.substr(0, eq)] = p.substr(eq + 1);
    }
  }

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    used_.insert(key);
    return it->second;
  }

  double get_double(const std::string& key, double dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    used_.insert(key);
    char* end = nullptr;
    const double v = std::strtod(it->second.c_str(), &end);
    if (end == it->second.c_str() || *end != '\0')
      throw ConfigError(where(key) + ": '" + key + "' must be a number, got '" +
                        it->second + "'");
    return v;
  }

  long get_int(const std::string& key, long dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    used_.insert(key);
    char* end = nullptr;
    const long v = std::strtol(it->second.c_str(), &end, 10);
    if (end == it->second.c_str() || *end != '\0')
      throw ConfigError(where(key) + ": '" + key + "' must be an integer, got '" +
                        it->second + "'");
    return v;
  }

  bool get_bool(const std::string& key, bool dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    used_.insert(key);
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw ConfigError(where(key) + ": '" + key + "' must be true/false, got '" +
                      it->second + "'");
  }

  // Comma-separated doubles.
  std::vector<double> get_list(const std::string& key,
                               std::vector<double> dflt = {}) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    used_.insert(key);
    std::vector<double> out;
    std::istringstream ss(it->second);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0')
        throw ConfigError(where(key) + ": '" + key +
                          "' must be a comma-separated number list, bad entry '" +
                          tok + "'");
      out.push_back(v);
    }
    return out;
  }

  void reject_unknown() const {
    for (const auto& [k, v] : kv_)
      if (!used_.count(k))
        throw ConfigError(where(k) + ": unknown key '" + k + "'");
  }

  // Canonical text form: sorted keys, one per line. Feeding this back through
  // parse() reproduces the same configuration.
  std::string render() const {
    std::ostringstream os;
    for (const auto& [k, v] : kv_) os << k << " = " << v << "\n";
    return os.str();
  }

 private:
  std::string where(const std::string& key) const {
    auto it = lines_.find(key);
    if (it == lines_.end()) return source_.empty() ? "<override>" : source_;
    return source_ + ":" + std::to_string(it->second);
  }

  std::map<std::string, std::string> kv_;
  std::map<std::string, std::size_t> lines_;
  mutable std::set<std::string> used_;
  std::string source_;
};

// Everything needed to run a simulation, materialized from a Config.
struct SimulationSetup {
  int k = 1;
  RadialProfile initial;
  FlowControls controls;
  unsigned seed = 0;
  std::string initial_kind;
  std::string config_text;  // canonical round-trippable form
};

// Build the initial data from the `initial.*` namespace. Presets:
//   initial.kind = single_bubble | multi_bubble | bubble_plus_bump | file
inline RadialProfile build_initial(const Config& cfg, int k,
                                   const RadialGrid& grid) {
  const std::string kind = cfg.get_string("initial.kind", "single_bubble");
  if (kind == "file") {
    const std::string path = cfg.get_string("initial.path", "");
    if (path.empty()) throw ConfigError("initial.kind=file requires initial.path");
    auto u = read_profile(path);
    if (u.k != k)
      throw ConfigError("initial.path: profile has k=" + std::to_string(u.k) +
                        " but config requests k=" + std::to_string(k));
    return resample(u, grid);
  }

  BubbleConfig bc;
  bc.k = k;
  if (kind == "single_bubble") {
    const double lam = cfg.get_double("initial.lambda", 1.0);
    if (!(lam > 0.0)) throw ConfigError("initial.lambda must be > 0");
    bc.lambdas = {lam};
    bc.iotas = {int(cfg.get_int("initial.iota", 1))};
  } else if (kind == "multi_bubble" || kind == "bubble_plus_bump") {
    auto lams = cfg.get_list("initial.lambdas");
    if (lams.empty())
      throw ConfigError("initial.kind=" + kind + " requires initial.lambdas");
    auto iotas_d = cfg.get_list("initial.iotas");
    std::vector<int> iotas;
    if (iotas_d.empty()) {
      iotas.assign(lams.size(), 1);
    } else {
      for (double v : iotas_d) {
        if (v != 1.0 && v != -1.0)
          throw ConfigError("initial.iotas entries must be +1 or -1");
        iotas.push_back(int(v));
      }
    }
    if (iotas.size() != lams.size())
      throw ConfigError("initial.iotas and initial.lambdas length mismatch");
    bc.lambdas = lams;
    bc.iotas = iotas;
  } else {
    throw ConfigError("initial.kind '" + kind +
                      "' not recognized (single_bubble, multi_bubble, "
                      "bubble_plus_bump, file)");
  }

  // The sector endpoint m is determined by the sign pattern: the profile
  // connects 0 to m*pi with m = ell + sum(iota) and ell = 0 by default.
  const int ell = int(cfg.get_int("initial.ell", 0));
  int sum = 0;
  for (int io : bc.iotas) sum += io;
  bc.m = ell + sum;
  if (cfg.has("initial.m")) {
    const int m_req = int(cfg.get_int("initial.m", bc.m));
    if (m_req != bc.m)
      throw ConfigError(
          "initial.m=" + std::to_string(m_req) +
          " violates the sector relation ell = m - sum(iota): with ell=" +
          std::to_string(ell) + " and sum(iota)=" + std::to_string(sum) +
          " the endpoint must be m=" + std::to_string(bc.m));
  }
  if (bc.m < 0)
    throw ConfigError("initial data leaves the nonnegative sector: ell + sum(iota) = " +
                      std::to_string(bc.m));
  bc.check();

  RadialProfile u = multi_bubble(bc, grid);

  if (kind == "bubble_plus_bump") {
    // Compactly supported energy-space bump, deterministic in the seed.
    const double amp = cfg.get_double("initial.bump.amplitude", 0.1);
    const double c = cfg.get_double("initial.bump.center", 1.0);
    const double w = cfg.get_double("initial.bump.width", 1.0);
    if (!(c > 0.0) || !(w > 0.0))
      throw ConfigError("initial.bump.center and initial.bump.width must be > 0");
    const double sc = std::log(c);
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double x = (u.grid.s(i) - sc) / w;
      if (std::abs(x) < 1.0) {
        const double bump = std::exp(1.0 - 1.0 / (1.0 - x * x));
        u.values[i] += amp * bump;
      }
    }
  }
  u.check();
  return u;
}

inline SimulationSetup make_setup(const Config& cfg) {
  SimulationSetup st;
  st.k = int(cfg.get_int("k", 1));
  if (st.k < 1) throw ConfigError("k violates the equivariance constraint k >= 1");

  const double r_min = cfg.get_double("grid.r_min", 1e-6);
  const double r_max = cfg.get_double("grid.r_max", 1e6);
  const long n = cfg.get_int("grid.n", 4096);
  if (!(r_min > 0.0 && r_min < r_max))
    throw ConfigError("grid: require 0 < grid.r_min < grid.r_max");
  if (n < 16) throw ConfigError("grid.n must be >= 16");
  const auto grid = make_grid(r_min, r_max, std::size_t(n));

  st.initial = build_initial(cfg, st.k, grid);
  st.initial_kind = cfg.get_string("initial.kind", "single_bubble");

  auto& fc = st.controls;
  fc.t_end = cfg.get_double("flow.t_end", 1.0);
  fc.dt_init = cfg.get_double("flow.dt_init", 1e-6);
  fc.err_tol = cfg.get_double("flow.err_tol", 1e-8);
  fc.checkpoint_dt = cfg.get_double("flow.checkpoint_dt", 0.0);
  fc.max_steps = std::size_t(cfg.get_int("flow.max_steps", 5'000'000));
  fc.eps0 = cfg.get_double("flow.eps0", -1.0);
  fc.min_scale = cfg.get_double("flow.min_scale", 0.0);
  fc.stability_factor = cfg.get_double("flow.stability_factor", 0.25);
  fc.stop_when_stationary = cfg.get_bool("flow.stop_when_stationary", false);
  fc.stationary_tol = cfg.get_double("flow.stationary_tol", 1e-10);
  fc.adapt_dt = cfg.get_bool("flow.adapt_dt", true);
  fc.dt_follow_stability = cfg.get_bool("flow.dt_follow_stability", false);
  fc.allow_remesh = cfg.get_bool("flow.allow_remesh", true);
  if (!(fc.t_end > 0.0)) throw ConfigError("flow.t_end must be > 0");
  if (!(fc.dt_init > 0.0)) throw ConfigError("flow.dt_init must be > 0");

  st.seed = unsigned(cfg.get_int("seed", 0));

  cfg.reject_unknown();
  st.config_text = cfg.render();
  return st;
}

}  // namespace hmflow
