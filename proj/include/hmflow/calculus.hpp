#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "hmflow/grid.hpp"
#include "hmflow/profile.hpp"

namespace hmflow {

inline constexpr double kTwoPi = 2.0 * kPi;

struct EnergyReport {
  double total = 0.0;
  double kinetic = 0.0;
  double potential = 0.0;
  double r1 = 0.0, r2 = 0.0;
};

namespace detail {

struct Window {
  double s1, s2;
};

inline Window clamp_window(const RadialGrid& g, double r1, double r2) {
  if (!(r1 <= r2)) throw std::invalid_argument("window: require r1 <= r2");
  // r1 = 0 and r2 = inf denote the truncated full line.
  const double s1 = (r1 <= g.r_min()) ? g.s(0) : std::log(r1);
  const double s2 = (r2 >= g.r_max()) ? g.s(g.size() - 1) : std::log(r2);
  if (s1 > g.s(g.size() - 1) + 1e-12 || s2 < g.s(0) - 1e-12)
    throw std::invalid_argument("window: outside grid");
  return {s1, s2};
}

// Trapezoid in s of node samples f(s_i), clipped to [s1, s2] with linear
// interpolation at partial segment ends.
inline double trapezoid_window(const RadialGrid& g, const std::vector<double>& f,
                               double s1, double s2) {
  const auto& s = g.log_nodes();
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < g.size(); ++i) {
    const double a = std::max(s[i], s1);
    const double b = std::min(s[i + 1], s2);
    if (b <= a) continue;
    const double ds = s[i + 1] - s[i];
    const double fa = f[i] + (f[i + 1] - f[i]) * (a - s[i]) / ds;
    const double fb = f[i] + (f[i + 1] - f[i]) * (b - s[i]) / ds;
    acc += 0.5 * (fa + fb) * (b - a);
  }
  return acc;
}

// Midpoint rule in s of per-segment samples, clipped to [s1, s2]. Partial
// segments contribute their clipped length times the segment value.
inline double midpoint_window(const RadialGrid& g, const std::vector<double>& fm,
                              double s1, double s2) {
  const auto& s = g.log_nodes();
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < g.size(); ++i) {
    const double a = std::max(s[i], s1);
    const double b = std::min(s[i + 1], s2);
    if (b <= a) continue;
    acc += fm[i] * (b - a);
  }
  return acc;
}

// Centered 3-point derivative du/ds on the (possibly nonuniform) log grid;
// one-sided at the ends.
inline std::vector<double> dds(const RadialGrid& g, const std::vector<double>& u) {
  const auto& s = g.log_nodes();
  const std::size_t n = u.size();
  std::vector<double> d(n);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h1 = s[i] - s[i - 1], h2 = s[i + 1] - s[i];
    d[i] = (-h2 / (h1 * (h1 + h2))) * u[i - 1] + ((h2 - h1) / (h1 * h2)) * u[i] +
           (h1 / (h2 * (h1 + h2))) * u[i + 1];
  }
  d[0] = (u[1] - u[0]) / (s[1] - s[0]);
  d[n - 1] = (u[n - 1] - u[n - 2]) / (s[n - 1] - s[n - 2]);
  return d;
}

// Richardson-combined quadrature of a quadratic-in-derivative density.
// `node_f(i, dudsl)` and `mid_f(i, dudsl)` evaluate the density (already in
// the s variable, r dr Jacobian absorbed) at node i resp. segment i, given
// the local du/ds estimate. The node pass uses centered differences, the
// segment pass the staggered difference; the (4*mid - node)/3 combination
// cancels the leading O(ds^2) derivative bias on locally uniform spans.
inline double dual_quad(const RadialGrid& g, const std::vector<double>& u,
                        double s1, double s2,
                        const std::function<double(std::size_t, double)>& node_f,
                        const std::function<double(std::size_t, double)>& mid_f) {
  const std::size_t n = g.size();
  const auto d = dds(g, u);
  std::vector<double> fn(n), fm(n - 1);
  for (std::size_t i = 0; i < n; ++i) fn[i] = node_f(i, d[i]);
  const auto& s = g.log_nodes();
  for (std::size_t i = 0; i + 1 < n; ++i)
    fm[i] = mid_f(i, (u[i + 1] - u[i]) / (s[i + 1] - s[i]));
  const double In = trapezoid_window(g, fn, s1, s2);
  const double Im = midpoint_window(g, fm, s1, s2);
  return (4.0 * Im - In) / 3.0;
}

}  // namespace detail

// Quadrature of \int_{r1}^{r2} f(r) r dr for node-sampled f.
inline double integrate(const RadialGrid& g, const std::vector<double>& f,
                        double r1, double r2) {
  if (f.size() != g.size()) throw std::invalid_argument("integrate: size mismatch");
  const auto w = detail::clamp_window(g, r1, r2);
  std::vector<double> fs(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) fs[i] = f[i] * g.r(i) * g.r(i);
  return detail::trapezoid_window(g, fs, w.s1, w.s2);
}

// <phi|psi> = \int phi psi r dr over the whole grid.
inline double inner(const RadialGrid& g, const std::vector<double>& phi,
                    const std::vector<double>& psi) {
  if (phi.size() != g.size() || psi.size() != g.size())
    throw std::invalid_argument("inner: grid mismatch");
  double acc = 0.0;
  const auto& w = g.weights();
  for (std::size_t i = 0; i < phi.size(); ++i) acc += w[i] * phi[i] * psi[i];
  return acc;
}

inline double l2_norm_sq(const RadialGrid& g, const std::vector<double>& f) {
  return inner(g, f, f);
}

// Dirichlet energy 2*pi \int 1/2 ((du)^2 + k^2 sin^2(u)/r^2) r dr over the
// window, du from centered differences.
inline EnergyReport energy(const RadialProfile& u, double r1 = 0.0,
                           double r2 = std::numeric_limits<double>::infinity()) {
  const auto w = detail::clamp_window(u.grid, r1, r2);
  const double k2 = double(u.k) * double(u.k);
  const auto& uv = u.values;
  const double kin = detail::dual_quad(
      u.grid, uv, w.s1, w.s2,
      [](std::size_t, double d) { return d * d; },
      [](std::size_t, double d) { return d * d; });
  const double pot = detail::dual_quad(
      u.grid, uv, w.s1, w.s2,
      [&](std::size_t i, double) {
        const double sv = sin_reduced(uv[i]);
        return k2 * sv * sv;
      },
      [&](std::size_t i, double) {
        const double sv = sin_reduced(0.5 * (uv[i] + uv[i + 1]));
        return k2 * sv * sv;
      });
  EnergyReport rep;
  rep.kinetic = kTwoPi * 0.5 * kin;
  rep.potential = kTwoPi * 0.5 * pot;
  rep.total = rep.kinetic + rep.potential;
  rep.r1 = r1;
  rep.r2 = r2;
  return rep;
}

// Linear energy-space seminorm squared over the window (bare r dr measure):
// \int ((dg)^2 + k^2 g^2 / r^2) r dr.
inline double energy_norm_sq(const RadialGrid& g, const std::vector<double>& f,
                             int k, double r1 = 0.0,
                             double r2 = std::numeric_limits<double>::infinity()) {
  if (f.size() != g.size()) throw std::invalid_argument("energy_norm: size mismatch");
  const auto w = detail::clamp_window(g, r1, r2);
  const double k2 = double(k) * double(k);
  return detail::dual_quad(
      g, f, w.s1, w.s2,
      [&](std::size_t i, double d) { return d * d + k2 * f[i] * f[i]; },
      [&](std::size_t i, double d) {
        const double gm = 0.5 * (f[i] + f[i + 1]);
        return d * d + k2 * gm * gm;
      });
}

// Tension T(u) = u_rr + u_r/r - k^2 sin(2u)/(2 r^2), computed in the log
// variable as (u_ss - k^2 sin(2u)/2)/r^2 with 3-point second differences.
// One-sided (first-order) stencils at the boundary nodes.
inline std::vector<double> tension(const RadialProfile& u) {
  const std::size_t n = u.size();
  if (n < 3) throw std::invalid_argument("tension: need at least 3 nodes");
  const auto& s = u.grid.log_nodes();
  const auto& uv = u.values;
  const double k2 = double(u.k) * double(u.k);
  std::vector<double> T(n);
  const auto uss_at = [&](std::size_t i) {
    const double h1 = s[i] - s[i - 1], h2 = s[i + 1] - s[i];
    return 2.0 * (h2 * uv[i - 1] - (h1 + h2) * uv[i] + h1 * uv[i + 1]) /
           (h1 * h2 * (h1 + h2));
  };
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double r = u.grid.r(i);
    T[i] = (uss_at(i) - 0.5 * k2 * sin2_reduced(uv[i])) / (r * r);
  }
  // One-sided second difference at the ends (reuse the adjacent stencil).
  {
    const double r0 = u.grid.r(0), rn = u.grid.r(n - 1);
    T[0] = (uss_at(1) - 0.5 * k2 * sin2_reduced(uv[0])) / (r0 * r0);
    T[n - 1] = (uss_at(n - 2) - 0.5 * k2 * sin2_reduced(uv[n - 1])) / (rn * rn);
  }
  return T;
}

}  // namespace hmflow
