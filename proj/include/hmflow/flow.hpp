#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "hmflow/calculus.hpp"
#include "hmflow/grid.hpp"
#include "hmflow/profile.hpp"
#include "hmflow/tridiag.hpp"

namespace hmflow {

struct FlowState {
  double t = 0.0;
  RadialProfile profile;
  double dt_last = 0.0;
  std::size_t step_count = 0;
  double inner_scale = 0.0;  // innermost half-angle crossing radius
};

struct LedgerRow {
  double t = 0.0;
  double energy = 0.0;       // solver-native discrete energy
  double dissipation = 0.0;  // cumulative 2*pi int ||dt u||^2
  double residual = 0.0;     // energy identity defect vs the first row
  double dt = 0.0;
  std::size_t n_nodes = 0;
};

struct EnergyLedger {
  std::vector<LedgerRow> rows;
  double residual_bound = 1e-4;

  bool monotone(double tol) const {
    for (std::size_t i = 1; i < rows.size(); ++i)
      if (rows[i].energy > rows[i - 1].energy + tol) return false;
    return true;
  }
};

enum class FlowStatus { ReachedTEnd, BlowupDetected, Stationary };

inline const char* to_string(FlowStatus s) {
  switch (s) {
    case FlowStatus::ReachedTEnd: return "reached_t_end";
    case FlowStatus::BlowupDetected: return "blowup_detected";
    case FlowStatus::Stationary: return "stationary";
  }
  return "?";
}

struct TerminationReport {
  FlowStatus status = FlowStatus::ReachedTEnd;
  double T_plus = std::numeric_limits<double>::quiet_NaN();  // blow-up estimate
  std::vector<std::pair<double, double>> concentration_history;  // (t, scale)
  double eps0 = 0.0;
  int consecutive_hits = 0;
};

struct Checkpoint {
  double t = 0.0;
  RadialProfile profile;
  double tension_l2_sq = 0.0;
  double inner_scale = 0.0;
  double cum_dissipation = 0.0;
};

struct FlowControls {
  double t_end = 1.0;
  double dt_init = 1e-6;
  double err_tol = 1e-8;          // per-step local error (energy-space norm)
  double checkpoint_dt = 0.0;     // 0: auto (t_end/64)
  std::size_t max_steps = 5'000'000;
  double eps0 = -1.0;             // <0: default 2*pi*k
  double min_scale = 0.0;         // 0: auto (r_min * 64)
  double stability_factor = 0.25; // dt <= factor * inner_scale^2 / k^2
  bool stop_when_stationary = false;
  double stationary_tol = 1e-10;  // on ||T||_L2^2
  bool adapt_dt = true;
  // Concentration runs: skip step doubling and ride the stability cap, which
  // already tracks the shrinking scale.
  bool dt_follow_stability = false;
  bool allow_remesh = true;
};

struct FlowResult {
  FlowState final_state;
  std::vector<Checkpoint> trajectory;
  EnergyLedger ledger;
  TerminationReport termination;
};

// Innermost radius where u crosses an odd multiple of pi/2 (i.e. cos u changes
// sign); r_max when there is no crossing.
inline double innermost_scale(const RadialProfile& u) {
  const auto& s = u.grid.log_nodes();
  double prev = std::cos(u.values[0]);
  for (std::size_t i = 1; i < u.size(); ++i) {
    const double cur = std::cos(u.values[i]);
    if (prev == 0.0) return u.grid.r(i - 1);
    if (prev * cur < 0.0) {
      const double t = prev / (prev - cur);
      return std::exp(s[i - 1] + t * (s[i] - s[i - 1]));
    }
    prev = cur;
  }
  return u.grid.r_max();
}

// Solver-native discrete energy: P1 kinetic term plus a trapezoidal potential
// term in the log variable. Its exact gradient is the discrete tension, so the
// energy identity closes to the order of the time stepping.
inline double energy_discrete(const RadialProfile& u) {
  const auto& s = u.grid.log_nodes();
  const auto& uv = u.values;
  const double k2 = double(u.k) * double(u.k);
  double kin = 0.0, pot = 0.0;
  for (std::size_t i = 0; i + 1 < uv.size(); ++i) {
    const double ds = s[i + 1] - s[i];
    const double slope = (uv[i + 1] - uv[i]) / ds;
    kin += slope * slope * ds;
    const double sa = sin_reduced(uv[i]), sb = sin_reduced(uv[i + 1]);
    pot += 0.5 * ds * k2 * (sa * sa + sb * sb);
  }
  return kTwoPi * 0.5 * (kin + pot);
}

namespace detail {

// (I - theta L) with L v = (v_ss - k^2 v)/r^2, Dirichlet rows at both ends.
inline Tridiag imex_matrix(const RadialGrid& g, int k, double theta) {
  const std::size_t n = g.size();
  const auto& s = g.log_nodes();
  const double k2 = double(k) * double(k);
  Tridiag M(n);
  M.diag[0] = M.diag[n - 1] = 1.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h1 = s[i] - s[i - 1], h2 = s[i + 1] - s[i];
    const double r2 = g.r(i) * g.r(i);
    M.lower[i] = -theta * 2.0 / (h1 * (h1 + h2)) / r2;
    M.upper[i] = -theta * 2.0 / (h2 * (h1 + h2)) / r2;
    M.diag[i] = 1.0 + theta * (2.0 / (h1 * h2) + k2) / r2;
  }
  return M;
}

inline std::vector<double> apply_L(const RadialGrid& g, int k,
                                   const std::vector<double>& v) {
  const std::size_t n = g.size();
  const auto& s = g.log_nodes();
  const double k2 = double(k) * double(k);
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h1 = s[i] - s[i - 1], h2 = s[i + 1] - s[i];
    const double vss = 2.0 * (h2 * v[i - 1] - (h1 + h2) * v[i] + h1 * v[i + 1]) /
                       (h1 * h2 * (h1 + h2));
    out[i] = (vss - k2 * v[i]) / (g.r(i) * g.r(i));
  }
  return out;
}

}  // namespace detail

// One IMEX step (trapezoidal in the implicit linear part, Heun in the bounded
// nonlinear remainder), written in increment form so the stiff linear and
// nonlinear pieces cancel before the solve. Endpoint values are held fixed.
inline RadialProfile imex_step(const RadialProfile& u, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("advance: dt must be > 0");
  const std::size_t n = u.size();
  const auto T0 = tension(u);

  const auto Mfull = detail::imex_matrix(u.grid, u.k, dt);
  std::vector<double> rhs(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) rhs[i] = dt * T0[i];
  const auto dp = Mfull.solve(rhs);  // Euler predictor increment

  RadialProfile ustar = u;
  for (std::size_t i = 0; i < n; ++i) ustar.values[i] += dp[i];
  const auto T1 = tension(ustar);
  const auto Ldp = detail::apply_L(u.grid, u.k, dp);

  const auto Mhalf = detail::imex_matrix(u.grid, u.k, 0.5 * dt);
  for (std::size_t i = 1; i + 1 < n; ++i)
    rhs[i] = dt * T0[i] + 0.5 * dt * (T1[i] - T0[i] - Ldp[i]);
  rhs[0] = rhs[n - 1] = 0.0;
  const auto d = Mhalf.solve(rhs);

  RadialProfile out = u;
  for (std::size_t i = 0; i < n; ++i) out.values[i] += d[i];
  return out;
}

inline FlowState advance(const FlowState& state, double dt) {
  FlowState next;
  next.profile = imex_step(state.profile, dt);
  next.t = state.t + dt;
  next.dt_last = dt;
  next.step_count = state.step_count + 1;
  next.inner_scale = innermost_scale(next.profile);
  return next;
}

// Blow-up criterion on a window of checkpoints: E(u; 0, r0) >= eps0 must
// persist on at least 3 consecutive checkpoints while r0 shrinks through the
// given geometric schedule. Returns (fired, smallest firing r0).
inline std::pair<bool, double> detect_blowup(const std::vector<Checkpoint>& window,
                                             double eps0,
                                             const std::vector<double>& r0_schedule) {
  if (window.size() < 3) return {false, 0.0};
  double smallest = 0.0;
  bool fired = false;
  for (const double r0 : r0_schedule) {
    int consecutive = 0;
    bool hit = false;
    for (const auto& cp : window) {
      if (energy(cp.profile, 0.0, r0).total >= eps0) {
        if (++consecutive >= 3) hit = true;
      } else {
        consecutive = 0;
      }
    }
    if (hit) {
      fired = true;
      smallest = (smallest == 0.0) ? r0 : std::min(smallest, r0);
    }
  }
  return {fired, smallest};
}

namespace detail {

inline double lsq_Tplus(const std::vector<std::pair<double, double>>& hist) {
  // Least-squares line through (t, scale^2) over the trailing samples.
  const std::size_t use = std::min<std::size_t>(hist.size(), 12);
  if (use < 2) return std::numeric_limits<double>::quiet_NaN();
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (std::size_t i = hist.size() - use; i < hist.size(); ++i) {
    const double t = hist[i].first, y = hist[i].second * hist[i].second;
    st += t;
    sy += y;
    stt += t * t;
    sty += t * y;
  }
  const double nn = double(use);
  const double slope = (nn * sty - st * sy) / (nn * stt - st * st);
  const double icpt = (sy - slope * st) / nn;
  if (!(slope < 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return -icpt / slope;
}

}  // namespace detail

// Full evolution with adaptive time stepping (step doubling), checkpointing,
// remeshing and termination detection.
inline FlowResult run(const RadialProfile& initial, const FlowControls& controls) {
  initial.check();
  FlowResult res;
  FlowState st;
  st.profile = initial;
  st.inner_scale = innermost_scale(initial);

  const double eps0 = controls.eps0 > 0.0 ? controls.eps0 : kTwoPi * initial.k;
  const double cp_dt =
      controls.checkpoint_dt > 0.0 ? controls.checkpoint_dt : controls.t_end / 64.0;
  double min_scale = controls.min_scale;
  if (min_scale <= 0.0) min_scale = initial.grid.r_min() * 64.0;

  double dt = controls.dt_init;
  double cum_diss = 0.0;
  double next_cp = 0.0;
  int conc_hits = 0;
  double conc_r0 = initial.grid.r_max() / 8.0;
  int stat_hits = 0;
  std::vector<RefinementBand> bands;

  res.termination.eps0 = eps0;

  const auto record_checkpoint = [&](bool force) {
    if (!force && st.t + 1e-15 < next_cp) return false;
    if (!res.trajectory.empty() && res.trajectory.back().t == st.t) return false;
    next_cp = st.t + cp_dt;
    Checkpoint cp;
    cp.t = st.t;
    cp.profile = st.profile;
    const auto T = tension(st.profile);
    cp.tension_l2_sq = l2_norm_sq(st.profile.grid, T);
    cp.inner_scale = st.inner_scale;
    cp.cum_dissipation = cum_diss;
    res.trajectory.push_back(std::move(cp));

    LedgerRow row;
    row.t = st.t;
    row.energy = energy_discrete(st.profile);
    row.dissipation = cum_diss;
    row.dt = st.dt_last;
    row.n_nodes = st.profile.size();
    row.residual = res.ledger.rows.empty()
                       ? 0.0
                       : row.energy + row.dissipation -
                             (res.ledger.rows.front().energy +
                              res.ledger.rows.front().dissipation);
    res.ledger.rows.push_back(row);

    // Concentration monitor: interior energy at a geometrically shrinking r0.
    res.termination.concentration_history.emplace_back(st.t, st.inner_scale);
    if (energy(st.profile, 0.0, conc_r0).total >= eps0) {
      ++conc_hits;
      conc_r0 = std::max(conc_r0 / 2.0, st.inner_scale * 4.0);
    } else {
      conc_hits = 0;
      conc_r0 = std::min(conc_r0 * 2.0, st.profile.grid.r_max() / 8.0);
    }
    if (res.trajectory.back().tension_l2_sq < controls.stationary_tol)
      ++stat_hits;
    else
      stat_hits = 0;
    return true;
  };

  record_checkpoint(true);

  while (st.t < controls.t_end - 1e-15 && st.step_count < controls.max_steps) {
    // Resolution guard / remesh.
    const double ds_local =
        st.profile.grid.s(1) - st.profile.grid.s(0);  // densest spacing is inner
    if (st.inner_scale < st.profile.grid.r_min() * std::exp(16.0 * ds_local) &&
        controls.allow_remesh) {
      const double c = st.inner_scale;
      bands.push_back({std::max(c / 32.0, st.profile.grid.r_min() * 1.0001),
                       std::min(c * 32.0, st.profile.grid.r_max() * 0.9999), 8.0});
      // Drop bands the concentration has left behind.
      bands.erase(std::remove_if(bands.begin(), bands.end(),
                                 [&](const RefinementBand& b) {
                                   return b.r_lo > c * 64.0;
                                 }),
                  bands.end());
      const auto g = make_grid(st.profile.grid.r_min(), st.profile.grid.r_max(),
                               st.profile.size(), bands);
      st.profile = resample(st.profile, g);
    }

    // Stability cap from the explicit remainder at the innermost scale.
    const double k2 = double(st.profile.k) * double(st.profile.k);
    const double scale = std::min(st.inner_scale, st.profile.grid.r_max());
    const double dt_cap = controls.stability_factor * scale * scale / k2;
    if (controls.dt_follow_stability) dt = dt_cap;
    dt = std::min({dt, dt_cap, controls.t_end - st.t});

    const double dt_floor = 1e-14 * scale * scale;
    if (dt < dt_floor || st.inner_scale < min_scale) {
      res.termination.status = FlowStatus::BlowupDetected;
      break;
    }

    FlowState cand;
    if (controls.adapt_dt && !controls.dt_follow_stability) {
      const auto full = advance(st, dt);
      const auto half = advance(advance(st, 0.5 * dt), 0.5 * dt);
      std::vector<double> diff(st.profile.size());
      for (std::size_t i = 0; i < diff.size(); ++i)
        diff[i] = full.profile.values[i] - half.profile.values[i];
      const double err =
          std::sqrt(energy_norm_sq(st.profile.grid, diff, st.profile.k));
      cand = half;
      cand.step_count = st.step_count + 1;
      if (err > 4.0 * controls.err_tol && dt > 2.0 * dt_floor) {
        dt *= 0.5;
        continue;  // reject
      }
      const double grow =
          (err > 0.0) ? std::cbrt(controls.err_tol / err) : 2.0;
      dt *= std::clamp(0.9 * grow, 0.3, 2.0);
    } else {
      cand = advance(st, dt);
    }

    // Dissipation increment: 2*pi ||delta/dt_step||_L2^2 * dt_step, the
    // midpoint-in-time value of ||dt u||^2.
    {
      const double dt_step = cand.t - st.t;
      std::vector<double> delta(st.profile.size());
      for (std::size_t i = 0; i < delta.size(); ++i)
        delta[i] = cand.profile.values[i] - st.profile.values[i];
      cum_diss += kTwoPi * l2_norm_sq(st.profile.grid, delta) / dt_step;
    }
    st = cand;

    record_checkpoint(false);
    if (controls.stop_when_stationary && stat_hits >= 3) {
      res.termination.status = FlowStatus::Stationary;
      break;
    }
  }

  record_checkpoint(true);
  if (res.termination.status == FlowStatus::BlowupDetected) {
    res.termination.consecutive_hits = conc_hits;
    res.termination.T_plus = detail::lsq_Tplus(res.termination.concentration_history);
  } else if (res.termination.status != FlowStatus::Stationary) {
    res.termination.status = FlowStatus::ReachedTEnd;
  }
  res.final_state = st;
  return res;
}

// Time-dependent cutoff family for the localized energy inequality.
struct CutoffFamily {
  std::function<double(double t, double r)> phi;
  std::function<double(double t, double r)> dphi_dr;
  bool nonincreasing_in_t = true;
};

struct LocalEnergyReport {
  double worst_violation = 0.0;  // max over checkpoint pairs of LHS - RHS
  double worst_margin = 0.0;     // min over checkpoint pairs of RHS - LHS
  std::size_t pairs = 0;
};

// Evaluates the one-sided localized energy inequality
//   int e(t2) phi^2 + 1/2 int int (dt u)^2 phi^2
//     <= int e(t1) phi^2 + 2 int int (dr u)^2 (dr phi)^2
// on consecutive checkpoints, with dt u ~ T(u) and trapezoidal time averages.
inline LocalEnergyReport verify_local_energy(const std::vector<Checkpoint>& traj,
                                             const CutoffFamily& cutoff) {
  if (!cutoff.nonincreasing_in_t)
    throw std::invalid_argument("verify_local_energy: cutoff must be non-increasing in t");
  LocalEnergyReport rep;
  rep.worst_violation = -std::numeric_limits<double>::infinity();
  rep.worst_margin = std::numeric_limits<double>::infinity();

  const auto weighted_energy = [&](const Checkpoint& cp) {
    const auto& g = cp.profile.grid;
    const double k2 = double(cp.profile.k) * double(cp.profile.k);
    const auto d = detail::dds(g, cp.profile.values);
    double acc = 0.0;
    const auto& s = g.log_nodes();
    for (std::size_t i = 0; i + 1 < g.size(); ++i) {
      const double ds = s[i + 1] - s[i];
      const auto dens = [&](std::size_t j) {
        const double sv = sin_reduced(cp.profile.values[j]);
        const double p = cutoff.phi(cp.t, g.r(j));
        return 0.5 * (d[j] * d[j] + k2 * sv * sv) * p * p;
      };
      acc += 0.5 * ds * (dens(i) + dens(i + 1));
    }
    return acc;
  };
  const auto dissipation_density = [&](const Checkpoint& cp) {
    const auto T = tension(cp.profile);
    const auto& g = cp.profile.grid;
    double acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double p = cutoff.phi(cp.t, g.r(i));
      acc += g.weights()[i] * T[i] * T[i] * p * p;
    }
    return acc;
  };
  const auto gradient_density = [&](const Checkpoint& cp) {
    const auto& g = cp.profile.grid;
    const auto d = detail::dds(g, cp.profile.values);
    double acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double r = g.r(i);
      const double dp = cutoff.dphi_dr(cp.t, r);
      // (dr u)^2 (dr phi)^2 r dr ; dr u = (1/r) du/ds
      acc += g.weights()[i] * (d[i] / r) * (d[i] / r) * dp * dp;
    }
    return acc;
  };

  for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
    const auto& c1 = traj[i];
    const auto& c2 = traj[i + 1];
    const double dtau = c2.t - c1.t;
    const double lhs = weighted_energy(c2) +
                       0.25 * dtau * (dissipation_density(c1) + dissipation_density(c2));
    const double rhs = weighted_energy(c1) +
                       dtau * (gradient_density(c1) + gradient_density(c2));
    rep.worst_violation = std::max(rep.worst_violation, lhs - rhs);
    rep.worst_margin = std::min(rep.worst_margin, rhs - lhs);
    ++rep.pairs;
  }
  return rep;
}

}  // namespace hmflow
