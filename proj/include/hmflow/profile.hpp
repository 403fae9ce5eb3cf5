#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hmflow/grid.hpp"

namespace hmflow {

inline constexpr double kPi = 3.14159265358979323846;

// Default tolerance for rounding boundary values to multiples of pi.
inline constexpr double kBoundaryTol = 0.3;

// sin(x) reduced modulo pi: returns sin(x - round(x/pi)*pi) * sign, i.e. the
// exact value of sin(x) evaluated without loss of precision when x sits near
// a large multiple of pi.
inline double sin_reduced(double x) {
  const double n = std::nearbyint(x / kPi);
  const double v = std::sin(x - n * kPi);
  return (std::fmod(std::abs(n), 2.0) == 1.0) ? -v : v;
}

// sin(2x) with the same reduction (period pi in x).
inline double sin2_reduced(double x) {
  const double n = std::nearbyint(x / kPi);
  return std::sin(2.0 * (x - n * kPi));
}

inline double cos2(double x) {
  const double n = std::nearbyint(x / kPi);
  return std::cos(2.0 * (x - n * kPi));
}

// Radial polar-angle profile u(r) on a logarithmic grid, with equivariance
// degree k and sector labels (ell, m): u -> ell*pi at r_min, m*pi at r_max.
struct RadialProfile {
  RadialGrid grid;
  std::vector<double> values;
  int k = 1;
  int ell = 0;
  int m = 0;

  std::size_t size() const { return values.size(); }

  void check(double boundary_tol = kBoundaryTol) const {
    if (values.size() != grid.size())
      throw std::invalid_argument("profile: values/grid size mismatch");
    if (k < 1) throw std::invalid_argument("profile: require k >= 1");
    if (std::abs(values.front() - ell * kPi) > boundary_tol)
      throw std::invalid_argument("profile: inner boundary value off sector label");
    if (std::abs(values.back() - m * kPi) > boundary_tol)
      throw std::invalid_argument("profile: outer boundary value off sector label");
  }
};

// Nearest multiples of pi at the two endpoints, or nullopt when either
// endpoint sits further than `tol` from every multiple.
inline std::optional<std::pair<int, int>> sector_of(const std::vector<double>& u,
                                                    double tol = kBoundaryTol) {
  if (u.empty()) return std::nullopt;
  const auto snap = [tol](double v) -> std::optional<int> {
    const double n = std::nearbyint(v / kPi);
    if (std::abs(v - n * kPi) <= tol) return int(n);
    return std::nullopt;
  };
  const auto l0 = snap(u.front());
  const auto m0 = snap(u.back());
  if (!l0 || !m0) return std::nullopt;
  return std::make_pair(*l0, *m0);
}

namespace detail {

// Fritsch-Carlson monotone cubic (PCHIP) slopes on abscissae x.
inline std::vector<double> pchip_slopes(const std::vector<double>& x,
                                        const std::vector<double>& y) {
  const std::size_t n = x.size();
  std::vector<double> d(n, 0.0);
  if (n < 2) return d;
  std::vector<double> h(n - 1), delta(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h[i] = x[i + 1] - x[i];
    delta[i] = (y[i + 1] - y[i]) / h[i];
  }
  if (n == 2) {
    d[0] = d[1] = delta[0];
    return d;
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (delta[i - 1] * delta[i] <= 0.0) {
      d[i] = 0.0;
    } else {
      const double w1 = 2.0 * h[i] + h[i - 1];
      const double w2 = h[i] + 2.0 * h[i - 1];
      d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
    }
  }
  // One-sided endpoint slopes, clipped to preserve monotonicity.
  const auto end_slope = [](double h0, double h1, double d0, double d1) {
    double s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (s * d0 <= 0.0)
      s = 0.0;
    else if (d0 * d1 <= 0.0 && std::abs(s) > 3.0 * std::abs(d0))
      s = 3.0 * d0;
    return s;
  };
  d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
  d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
  return d;
}

}  // namespace detail

// Monotone-preserving cubic interpolation of the profile values onto a new
// grid, in the log variable. Outside the old domain the sector constants
// ell*pi / m*pi are used.
inline RadialProfile resample(const RadialProfile& u, const RadialGrid& new_grid) {
  const auto& xs = u.grid.log_nodes();
  const auto& ys = u.values;
  if (new_grid.log_nodes().front() > xs.back() ||
      new_grid.log_nodes().back() < xs.front())
    throw std::invalid_argument("resample: disjoint domains");

  const auto d = detail::pchip_slopes(xs, ys);
  RadialProfile out;
  out.grid = new_grid;
  out.k = u.k;
  out.ell = u.ell;
  out.m = u.m;
  out.values.resize(new_grid.size());
  for (std::size_t i = 0; i < new_grid.size(); ++i) {
    const double x = new_grid.s(i);
    if (x <= xs.front()) {
      out.values[i] = (x < xs.front() - 1e-13) ? u.ell * kPi : ys.front();
    } else if (x >= xs.back()) {
      out.values[i] = (x > xs.back() + 1e-13) ? u.m * kPi : ys.back();
    } else {
      const std::size_t j = u.grid.segment_of(x);
      const double h = xs[j + 1] - xs[j];
      const double t = (x - xs[j]) / h;
      const double t2 = t * t, t3 = t2 * t;
      out.values[i] = ys[j] * (2 * t3 - 3 * t2 + 1) + h * d[j] * (t3 - 2 * t2 + t) +
                      ys[j + 1] * (-2 * t3 + 3 * t2) + h * d[j + 1] * (t3 - t2);
    }
  }
  return out;
}

// Sampled radial function on a profile's grid; interpolate linearly in s.
inline double interp_value(const RadialGrid& grid, const std::vector<double>& v,
                           double s) {
  const auto& xs = grid.log_nodes();
  if (s <= xs.front()) return v.front();
  if (s >= xs.back()) return v.back();
  const std::size_t j = grid.segment_of(s);
  const double t = (s - xs[j]) / (xs[j + 1] - xs[j]);
  return v[j] * (1.0 - t) + v[j + 1] * t;
}

}  // namespace hmflow
