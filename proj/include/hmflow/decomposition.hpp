#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "hmflow/bubbles.hpp"
#include "hmflow/calculus.hpp"
#include "hmflow/flow.hpp"
#include "hmflow/grid.hpp"
#include "hmflow/profile.hpp"

namespace hmflow {

// Fitted multi-bubble decomposition of a profile.
struct Decomposition {
  BubbleConfig config;
  std::vector<double> error;        // g = u - u* - Q(config) on the grid
  double error_norm_sq = 0.0;       // ||g||_E^2 on the fit window
  std::vector<double> gap_terms;    // (lambda_j/lambda_{j+1})^k incl. boundary terms
  double distance = 0.0;            // sqrt(error_norm_sq + sum gap_terms)
};

struct ModulationState {
  std::vector<double> lambdas;
  std::vector<int> iotas;
  std::vector<double> error;              // g
  std::vector<double> ortho_residuals;    // <Z_lambda_j | g>
  int newton_iterations = 0;
  bool converged = false;
};

// Time context for the boundary scale convention lambda_{N+1}.
struct TimeContext {
  bool blowup = false;
  double T_plus = std::numeric_limits<double>::quiet_NaN();
  double t = 0.0;

  double outer_scale() const {
    const double v = blowup ? (T_plus - t) : t;
    return (v > 0.0) ? std::sqrt(v) : 0.0;
  }
};

struct CollisionInterval {
  double a = 0.0, b = 0.0;
  int K = 0;
  double duration_ratio = 0.0;       // sqrt(b - a) / lambda_K(a)
  double inf_lamK2_tension2 = 0.0;   // inf over interval of lambda_K^2 ||dt u||^2
  std::vector<std::pair<double, double>> rho_K;  // exterior-scale curve samples
};

struct CollisionReport {
  double eps = 0.0, eta = 0.0;
  std::vector<CollisionInterval> intervals;
};

namespace detail {

// Objective for a scale fit: ||u - Q(m, iota, lambda)||_E^2 on the window
// plus the gap terms, with optional lead (rho/lambda_1)^k and tail
// (lambda_M/tail)^k boundary contributions.
struct FitSpec {
  double r1 = 0.0;
  double r2 = std::numeric_limits<double>::infinity();
  double lead_scale = 0.0;  // 0: no lead term
  double tail_scale = 0.0;  // 0: no tail term
};

inline std::vector<double> fit_error(const RadialGrid& grid,
                                     const std::vector<double>& u,
                                     const BubbleConfig& c) {
  std::vector<double> g(u.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    g[i] = u[i] - multi_bubble_value(c, grid.r(i));
  return g;
}

inline double fit_objective(const RadialGrid& grid, const std::vector<double>& u,
                            const BubbleConfig& c, const FitSpec& spec) {
  const auto g = fit_error(grid, u, c);
  double val = energy_norm_sq(grid, g, c.k, spec.r1, spec.r2);
  const auto& lam = c.lambdas;
  for (std::size_t j = 0; j + 1 < lam.size(); ++j)
    val += std::pow(lam[j] / lam[j + 1], c.k);
  if (!lam.empty()) {
    if (spec.lead_scale > 0.0) val += std::pow(spec.lead_scale / lam.front(), c.k);
    if (spec.tail_scale > 0.0) val += std::pow(lam.back() / spec.tail_scale, c.k);
  } else if (spec.lead_scale > 0.0 && spec.tail_scale > 0.0) {
    val += std::pow(spec.lead_scale / spec.tail_scale, c.k);
  }
  return val;
}

// Compact Nelder-Mead on R^d; good enough for d <= 6 smooth objectives.
inline std::vector<double> nelder_mead(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x0, double scale, int max_iter, double* fbest = nullptr) {
  const std::size_t d = x0.size();
  if (d == 0) {
    if (fbest) *fbest = f(x0);
    return x0;
  }
  std::vector<std::vector<double>> xs(d + 1, x0);
  std::vector<double> fs(d + 1);
  for (std::size_t i = 0; i < d; ++i) xs[i + 1][i] += scale;
  for (std::size_t i = 0; i <= d; ++i) fs[i] = f(xs[i]);
  for (int it = 0; it < max_iter; ++it) {
    std::vector<std::size_t> ord(d + 1);
    for (std::size_t i = 0; i <= d; ++i) ord[i] = i;
    std::sort(ord.begin(), ord.end(),
              [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
    if (fs[ord[d]] - fs[ord[0]] < 1e-14 * (1.0 + std::abs(fs[ord[0]]))) break;
    std::vector<double> cen(d, 0.0);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) cen[j] += xs[ord[i]][j] / double(d);
    const auto& worst = xs[ord[d]];
    const auto mix = [&](double coef) {
      std::vector<double> y(d);
      for (std::size_t j = 0; j < d; ++j) y[j] = cen[j] + coef * (cen[j] - worst[j]);
      return y;
    };
    auto xr = mix(1.0);
    const double fr = f(xr);
    if (fr < fs[ord[0]]) {
      auto xe = mix(2.0);
      const double fe = f(xe);
      if (fe < fr) {
        xs[ord[d]] = xe;
        fs[ord[d]] = fe;
      } else {
        xs[ord[d]] = xr;
        fs[ord[d]] = fr;
      }
    } else if (fr < fs[ord[d - 1]]) {
      xs[ord[d]] = xr;
      fs[ord[d]] = fr;
    } else {
      auto xc = mix(-0.5);
      const double fc = f(xc);
      if (fc < fs[ord[d]]) {
        xs[ord[d]] = xc;
        fs[ord[d]] = fc;
      } else {
        for (std::size_t i = 1; i <= d; ++i) {
          for (std::size_t j = 0; j < d; ++j)
            xs[ord[i]][j] = 0.5 * (xs[ord[i]][j] + xs[ord[0]][j]);
          fs[ord[i]] = f(xs[ord[i]]);
        }
      }
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i <= d; ++i)
    if (fs[i] < fs[best]) best = i;
  if (fbest) *fbest = fs[best];
  return xs[best];
}

struct Crossing {
  double radius;
  int sign;  // +1 upward in r, -1 downward
};

// Radii where u crosses odd multiples of pi/2 inside (r1, r2), innermost
// first, with the crossing direction.
inline std::vector<Crossing> half_angle_crossings(const RadialGrid& grid,
                                                  const std::vector<double>& u,
                                                  double r1, double r2) {
  std::vector<Crossing> out;
  const auto& s = grid.log_nodes();
  double prev = std::cos(u[0]);
  for (std::size_t i = 1; i < u.size(); ++i) {
    const double cur = std::cos(u[i]);
    if (prev * cur < 0.0) {
      const double t = prev / (prev - cur);
      const double r = std::exp(s[i - 1] + t * (s[i] - s[i - 1]));
      if (r > r1 && r < r2)
        out.push_back({r, (u[i] > u[i - 1]) ? 1 : -1});
    }
    prev = cur;
  }
  return out;
}

// Optimize scales (log coordinates) for a fixed (m, iotas).
inline double optimize_scales(const RadialGrid& grid, const std::vector<double>& u,
                              int m, const std::vector<int>& iotas, int k,
                              const FitSpec& spec, std::vector<double>& lambdas,
                              int max_iter = 400) {
  const std::size_t M = lambdas.size();
  BubbleConfig c{m, iotas, lambdas, k};
  if (M == 0) return fit_objective(grid, u, c, spec);
  std::vector<double> x0(M);
  for (std::size_t j = 0; j < M; ++j) x0[j] = std::log(lambdas[j]);
  const auto obj = [&](const std::vector<double>& x) {
    BubbleConfig cc{m, iotas, {}, k};
    cc.lambdas.resize(M);
    for (std::size_t j = 0; j < M; ++j) {
      cc.lambdas[j] = std::exp(x[j]);
      if (j > 0 && cc.lambdas[j] <= cc.lambdas[j - 1] * 1.0000001)
        return 1e9 + x[j - 1] - x[j];  // keep scales ordered
    }
    return fit_objective(grid, u, cc, spec);
  };
  double fbest = 0.0;
  const auto x = nelder_mead(obj, x0, 0.15, int(max_iter * (M + 1)), &fbest);
  for (std::size_t j = 0; j < M; ++j) lambdas[j] = std::exp(x[j]);
  return fbest;
}

inline Decomposition best_fit(const RadialGrid& grid, const std::vector<double>& u,
                              int k, const FitSpec& spec, std::size_t M_cap,
                              std::optional<int> forced_m = std::nullopt,
                              std::optional<std::size_t> forced_M = std::nullopt,
                              unsigned jitter_seed = 0) {
  // Sector estimate at the window's outer edge.
  const double s2 = (spec.r2 >= grid.r_max()) ? grid.s(grid.size() - 1)
                                              : std::log(spec.r2);
  const int m_hat =
      forced_m ? *forced_m
               : int(std::nearbyint(interp_value(grid, u, s2) / kPi));

  auto crossings = half_angle_crossings(grid, u, spec.r1, spec.r2);
  if (crossings.size() > M_cap) {
    // Keep the innermost M_cap crossings (energy bounds M on physical inputs).
    crossings.resize(M_cap);
  }

  std::mt19937_64 rng(jitter_seed);
  std::uniform_real_distribution<double> jit(-0.3, 0.3);

  Decomposition best;
  best.distance = std::numeric_limits<double>::infinity();

  // Candidate configurations: the crossing-derived one, the vacuum, and
  // variants with the innermost or outermost bubble dropped.
  std::vector<std::vector<Crossing>> cands;
  cands.push_back(crossings);
  cands.push_back({});
  if (crossings.size() >= 1) {
    cands.emplace_back(crossings.begin() + 1, crossings.end());
    cands.emplace_back(crossings.begin(), crossings.end() - 1);
  }

  for (const auto& cand : cands) {
    if (forced_M && cand.size() != *forced_M) continue;
    const std::size_t M = cand.size();
    std::vector<int> iotas(M);
    std::vector<double> lambdas(M);
    for (std::size_t j = 0; j < M; ++j) {
      // Reading inward->outward, an upward crossing in r corresponds to +1.
      iotas[j] = cand[j].sign;
      lambdas[j] = cand[j].radius;
      if (jitter_seed != 0) lambdas[j] *= std::exp(jit(rng));
    }
    // The sector relation pins m for the window: m = ell + sum iota; the
    // outer-edge estimate already encodes it, so keep m_hat.
    std::vector<double> lam = lambdas;
    const double val = optimize_scales(grid, u, m_hat, iotas, k, spec, lam);
    if (val < best.distance * best.distance ||
        best.distance == std::numeric_limits<double>::infinity()) {
      BubbleConfig c{m_hat, iotas, lam, k};
      bool ordered = true;
      for (std::size_t j = 1; j < lam.size(); ++j)
        if (!(lam[j] > lam[j - 1])) ordered = false;
      if (!ordered) continue;
      Decomposition d;
      d.config = c;
      d.error = fit_error(grid, u, c);
      d.error_norm_sq = energy_norm_sq(grid, d.error, k, spec.r1, spec.r2);
      for (std::size_t j = 0; j + 1 < lam.size(); ++j)
        d.gap_terms.push_back(std::pow(lam[j] / lam[j + 1], k));
      if (!lam.empty()) {
        if (spec.lead_scale > 0.0)
          d.gap_terms.insert(d.gap_terms.begin(),
                             std::pow(spec.lead_scale / lam.front(), k));
        if (spec.tail_scale > 0.0)
          d.gap_terms.push_back(std::pow(lam.back() / spec.tail_scale, k));
      } else if (spec.lead_scale > 0.0 && spec.tail_scale > 0.0) {
        d.gap_terms.push_back(std::pow(spec.lead_scale / spec.tail_scale, k));
      }
      double sum = d.error_norm_sq;
      for (double gterm : d.gap_terms) sum += gterm;
      d.distance = std::sqrt(sum);
      if (d.distance < best.distance) best = std::move(d);
    }
  }
  return best;
}

// Dense Gaussian elimination with partial pivoting for the M x M Newton system.
inline std::vector<double> solve_dense(std::vector<std::vector<double>> A,
                                       std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t rr = col + 1; rr < n; ++rr)
      if (std::abs(A[rr][col]) > std::abs(A[piv][col])) piv = rr;
    if (std::abs(A[piv][col]) < 1e-300)
      throw std::runtime_error("modulate: singular Newton system (collided scales)");
    std::swap(A[piv], A[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t rr = col + 1; rr < n; ++rr) {
      const double f = A[rr][col] / A[col][col];
      for (std::size_t cc = col; cc < n; ++cc) A[rr][cc] -= f * A[col][cc];
      b[rr] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double acc = b[i];
    for (std::size_t j = i + 1; j < n; ++j) acc -= A[i][j] * x[j];
    x[i] = acc / A[i][i];
  }
  return x;
}

}  // namespace detail

// Approximate infimum of the localized distance delta_R: fit over m, M <= M_cap,
// signs and scales of ||u - Q||_E(r<=R)^2 + sum_{j=1}^{M} (lambda_j/lambda_{j+1})^k
// with the convention lambda_{M+1} = R.
inline Decomposition fit_delta_R(const RadialProfile& u, double R,
                                 std::size_t M_cap = 5, unsigned jitter_seed = 0) {
  if (!(R > u.grid.r_min() && R <= u.grid.r_max() * (1.0 + 1e-12)))
    throw std::invalid_argument("fit_delta_R: R outside grid");
  detail::FitSpec spec;
  spec.r1 = 0.0;
  spec.r2 = R;
  spec.tail_scale = R;
  return detail::best_fit(u.grid, u.values, u.k, spec, M_cap, std::nullopt,
                          std::nullopt, jitter_seed);
}

// Localized multi-bubble proximity d_K(t; rho): fit of N-K exterior bubbles to
// u - u* on (rho, inf) with the boundary terms (rho/lambda_{K+1})^k and
// (lambda_N / lambda_{N+1})^k, lambda_{N+1} from the time context.
inline Decomposition proximity_d(const RadialProfile& u,
                                 const std::vector<double>& u_star, std::size_t N,
                                 std::size_t K, double rho, const TimeContext& ctx,
                                 std::size_t M_cap = 5) {
  const double outer = ctx.outer_scale();
  if (!(outer > 0.0))
    throw std::invalid_argument("proximity_d: time context gives no outer scale");
  std::vector<double> v(u.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    v[i] = u.values[i] - (u_star.empty() ? 0.0 : u_star[i]);
  detail::FitSpec spec;
  spec.r1 = std::max(rho, 0.0);
  spec.r2 = std::numeric_limits<double>::infinity();
  spec.lead_scale = rho;
  spec.tail_scale = outer;
  const std::size_t M = N - K;
  return detail::best_fit(u.grid, v, u.k, spec, std::min(M_cap, M), std::nullopt, M);
}

// Static modulation: Newton iteration on log-scales solving the orthogonality
// system <Z_{lambda_j} | u - u* - Q(m, iota, lambda)> = 0.
inline ModulationState modulate(const RadialProfile& u,
                                const std::vector<double>& u_star,
                                const BubbleConfig& initial, int max_newton = 60,
                                double tol = 1e-12) {
  initial.check();
  const std::size_t M = initial.bubble_count();
  const auto& grid = u.grid;
  std::vector<double> v(u.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    v[i] = u.values[i] - (u_star.empty() ? 0.0 : u_star[i]);

  ModulationState ms;
  ms.iotas = initial.iotas;
  ms.lambdas = initial.lambdas;

  const auto residuals = [&](const std::vector<double>& lam) {
    BubbleConfig c{initial.m, initial.iotas, lam, initial.k};
    const auto g = detail::fit_error(grid, v, c);
    std::vector<double> F(M);
    for (std::size_t j = 0; j < M; ++j)
      F[j] = inner(grid, eval_Z(lam[j], initial.k, grid), g);
    return F;
  };

  // Scale for the convergence test: residuals pair Z against g, so compare
  // against ||Z|| * ||g||-sized quantities.
  std::vector<double> lam = ms.lambdas;
  double fnorm0 = 0.0;
  {
    const auto F0 = residuals(lam);
    for (double f : F0) fnorm0 = std::max(fnorm0, std::abs(f));
  }
  const double fscale = std::max(fnorm0, 1e-8);

  bool ok = false;
  int it = 0;
  for (; it < max_newton; ++it) {
    const auto F = residuals(lam);
    double fmax = 0.0;
    for (double f : F) fmax = std::max(fmax, std::abs(f));
    if (fmax <= tol * fscale + 1e-14) {
      ok = true;
      break;
    }
    // Finite-difference Jacobian in log-lambda.
    std::vector<std::vector<double>> J(M, std::vector<double>(M));
    const double h = 1e-6;
    for (std::size_t c = 0; c < M; ++c) {
      auto lam2 = lam;
      lam2[c] *= std::exp(h);
      const auto F2 = residuals(lam2);
      for (std::size_t r = 0; r < M; ++r) J[r][c] = (F2[r] - F[r]) / h;
    }
    std::vector<double> step;
    step = detail::solve_dense(J, F);
    double damp = 1.0;
    for (std::size_t j = 0; j < M; ++j)
      damp = std::min(damp, 0.5 / std::max(std::abs(step[j]), 1e-30));
    damp = std::min(damp, 1.0);
    for (std::size_t j = 0; j < M; ++j) lam[j] *= std::exp(-damp * step[j]);
    for (std::size_t j = 1; j < M; ++j)
      if (!(lam[j] > lam[j - 1]))
        throw std::runtime_error("modulate: scales collided during Newton");
  }
  ms.newton_iterations = it;
  ms.converged = ok;
  ms.lambdas = lam;
  BubbleConfig c{initial.m, initial.iotas, lam, initial.k};
  ms.error = detail::fit_error(grid, v, c);
  ms.ortho_residuals = residuals(lam);
  return ms;
}

// Per-checkpoint tracked quantities.
struct TrackPoint {
  double t = 0.0;
  std::vector<double> lambdas;
  double d = 0.0;             // proximity with boundary term
  double error_norm = 0.0;    // ||g||_E
  double ortho_residual_max = 0.0;
  double tension_l2_sq = 0.0;
  bool ok = false;
};

// Proximity value from a modulation result plus the boundary convention term.
inline double proximity_from_modulation(const RadialGrid& grid,
                                        const ModulationState& ms, int k,
                                        const TimeContext& ctx) {
  double sum = energy_norm_sq(grid, ms.error, k);
  for (std::size_t j = 0; j + 1 < ms.lambdas.size(); ++j)
    sum += std::pow(ms.lambdas[j] / ms.lambdas[j + 1], k);
  const double outer = ctx.outer_scale();
  if (!ms.lambdas.empty() && outer > 0.0)
    sum += std::pow(ms.lambdas.back() / outer, k);
  return std::sqrt(sum);
}

// Warm-started modulation along a trajectory; signs held fixed, previous
// solution seeds the next Newton solve, failures fall back to a fresh fit.
inline std::vector<TrackPoint> track_scales(const std::vector<Checkpoint>& traj,
                                            const std::vector<double>& u_star,
                                            const BubbleConfig& initial,
                                            const TimeContext& base_ctx) {
  std::vector<TrackPoint> out;
  BubbleConfig cur = initial;
  for (const auto& cp : traj) {
    TimeContext ctx = base_ctx;
    ctx.t = cp.t;
    TrackPoint tp;
    tp.t = cp.t;
    tp.tension_l2_sq = cp.tension_l2_sq;
    std::vector<double> ustar_here = u_star;
    if (!ustar_here.empty() && ustar_here.size() != cp.profile.size())
      ustar_here.clear();  // grid changed under remesh; body map no longer aligned
    try {
      auto ms = modulate(cp.profile, ustar_here, cur);
      if (!ms.converged) throw std::runtime_error("modulation stalled");
      tp.lambdas = ms.lambdas;
      tp.error_norm = std::sqrt(energy_norm_sq(cp.profile.grid, ms.error, cur.k));
      for (double rr : ms.ortho_residuals)
        tp.ortho_residual_max = std::max(tp.ortho_residual_max, std::abs(rr));
      tp.d = proximity_from_modulation(cp.profile.grid, ms, cur.k, ctx);
      tp.ok = true;
      cur.lambdas = ms.lambdas;
    } catch (const std::exception&) {
      // Re-seed from a fresh localized fit; tracking loss is reported, not fatal.
      try {
        auto fit = fit_delta_R(cp.profile, cp.profile.grid.r_max(),
                               cur.bubble_count());
        if (fit.config.bubble_count() == cur.bubble_count()) {
          cur.lambdas = fit.config.lambdas;
          tp.lambdas = fit.config.lambdas;
          tp.d = fit.distance;
        }
      } catch (const std::exception&) {
      }
      tp.ok = false;
    }
    out.push_back(std::move(tp));
  }
  return out;
}

// Maximal disjoint intervals [a, b] with d(a) = eps, d(b) = eta, d in [eps, eta]
// inside. K is the largest ratio index whose gap collapses inside the interval.
inline CollisionReport detect_collisions(const std::vector<TrackPoint>& series,
                                         double eps, double eta,
                                         double collapse_threshold = 0.3) {
  if (!(0.0 < eps && eps < eta))
    throw std::invalid_argument("detect_collisions: require 0 < eps < eta");
  CollisionReport rep;
  rep.eps = eps;
  rep.eta = eta;
  const std::size_t n = series.size();
  std::size_t i = 0;
  while (i < n) {
    // Find the next eta-hit.
    std::size_t bi = i;
    while (bi < n && !(series[bi].ok && series[bi].d >= eta)) ++bi;
    if (bi >= n) break;
    // Walk back to the latest eps-hit before it.
    std::size_t ai = bi;
    bool found = false;
    for (std::size_t j = bi; j-- > i;) {
      if (series[j].ok && series[j].d <= eps) {
        ai = j;
        found = true;
        break;
      }
    }
    if (!found) {
      i = bi + 1;
      continue;
    }
    CollisionInterval iv;
    iv.a = series[ai].t;
    iv.b = series[bi].t;
    // K: largest gap index whose ratio reaches the collapse threshold inside.
    int K = 0;
    const std::size_t M = series[ai].lambdas.size();
    for (std::size_t j = ai; j <= bi; ++j) {
      const auto& lam = series[j].lambdas;
      for (std::size_t g = 0; g + 1 < lam.size(); ++g)
        if (lam[g] / lam[g + 1] >= collapse_threshold)
          K = std::max(K, int(g) + 1);
    }
    if (K == 0) K = 1;  // d grew, so at least one bubble lost its shape
    iv.K = K;
    const double lamK_a =
        (K - 1 < int(M)) ? series[ai].lambdas[K - 1] : series[ai].lambdas.back();
    iv.duration_ratio = std::sqrt(std::max(iv.b - iv.a, 0.0)) / lamK_a;
    double inf_mon = std::numeric_limits<double>::infinity();
    for (std::size_t j = ai; j <= bi; ++j) {
      const auto& lam = series[j].lambdas;
      if (lam.empty()) continue;
      const double lamK = (K - 1 < int(lam.size())) ? lam[K - 1] : lam.back();
      inf_mon = std::min(inf_mon, lamK * lamK * series[j].tension_l2_sq);
      const double lamK1 = (std::size_t(K) < lam.size()) ? lam[K] : 0.0;
      if (lamK1 > 0.0)
        iv.rho_K.emplace_back(series[j].t, std::sqrt(lamK * lamK1));
    }
    iv.inf_lamK2_tension2 = inf_mon;
    rep.intervals.push_back(std::move(iv));
    i = bi + 1;
  }
  return rep;
}

// Body map extraction near termination: last resolved checkpoint restricted to
// r >= rho, shifted down by m_Delta*pi and extended inward by zero. Global
// runs return the zero body map by convention.
inline RadialProfile extract_body_map(const std::vector<Checkpoint>& traj,
                                      bool blowup, double T_plus) {
  if (traj.empty()) throw std::invalid_argument("extract_body_map: empty trajectory");
  const auto& last = traj.back();
  RadialProfile out = last.profile;
  if (!blowup) {
    std::fill(out.values.begin(), out.values.end(), 0.0);
    out.ell = out.m = 0;
    return out;
  }
  if (traj.size() < 3)
    throw std::invalid_argument("extract_body_map: need >= 3 checkpoints");
  double rho = 16.0 * last.inner_scale;
  if (std::isfinite(T_plus) && T_plus > last.t)
    rho = std::max(rho, std::sqrt(last.inner_scale) *
                            std::pow(T_plus - last.t, 0.25));  // geometric mean
  const double srho = std::log(rho);
  const int m_delta =
      int(std::nearbyint(interp_value(last.profile.grid, last.profile.values, srho) / kPi));
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out.grid.s(i) < srho)
      out.values[i] = 0.0;
    else
      out.values[i] = last.profile.values[i] - m_delta * kPi;
  }
  out.ell = 0;
  out.m = last.profile.m - m_delta;
  return out;
}

}  // namespace hmflow
