#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "hmflow/calculus.hpp"
#include "hmflow/grid.hpp"
#include "hmflow/profile.hpp"

namespace hmflow {

// Multi-bubble configuration: m*pi + sum_j iota_j (Q_{lambda_j} - pi) with
// strictly increasing scales. M = 0 is the pure vacuum m*pi.
struct BubbleConfig {
  int m = 0;
  std::vector<int> iotas;     // +-1
  std::vector<double> lambdas;  // strictly increasing
  int k = 1;

  std::size_t bubble_count() const { return lambdas.size(); }

  int ell() const {
    int sum = 0;
    for (int i : iotas) sum += i;
    return m - sum;
  }

  void check() const {
    if (k < 1) throw std::invalid_argument("bubble config: require k >= 1");
    if (iotas.size() != lambdas.size())
      throw std::invalid_argument("bubble config: iotas/lambdas length mismatch");
    for (std::size_t j = 0; j < lambdas.size(); ++j) {
      if (!(lambdas[j] > 0.0))
        throw std::invalid_argument("bubble config: scales must be positive");
      if (j > 0 && !(lambdas[j] > lambdas[j - 1]))
        throw std::invalid_argument("bubble config: scales must be increasing");
      if (iotas[j] != 1 && iotas[j] != -1)
        throw std::invalid_argument("bubble config: signs must be +-1");
    }
  }
};

// Q_lambda(r) = 2 arctan((r/lambda)^k). For r >> lambda evaluated through the
// complementary form pi - 2 arctan((lambda/r)^k) to keep full precision near
// the mπ plateau.
inline double Q_value(double r, double lambda, int k) {
  const double rho = r / lambda;
  if (rho <= 1.0) return 2.0 * std::atan(std::pow(rho, k));
  return kPi - 2.0 * std::atan(std::pow(1.0 / rho, k));
}

// Q_lambda(r) - pi, exact at both ends.
inline double Q_minus_pi(double r, double lambda, int k) {
  const double rho = r / lambda;
  if (rho <= 1.0) return 2.0 * std::atan(std::pow(rho, k)) - kPi;
  return -2.0 * std::atan(std::pow(1.0 / rho, k));
}

// LambdaQ(r) = r dQ/dr = k sin Q = 2k rho^k / (1 + rho^{2k}).
inline double LambdaQ_value(double r, double lambda, int k) {
  const double rho = r / lambda;
  const double p = (rho <= 1.0) ? std::pow(rho, k) : std::pow(1.0 / rho, k);
  return 2.0 * double(k) * p / (1.0 + p * p);
}

enum class Rescaling { EnergyInvariant, L2Invariant };

inline RadialProfile eval_Q(double lambda, int k, const RadialGrid& grid) {
  if (!(lambda > 0.0)) throw std::invalid_argument("eval_Q: lambda must be > 0");
  RadialProfile p;
  p.grid = grid;
  p.k = k;
  p.ell = 0;
  p.m = 1;
  p.values.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i)
    p.values[i] = Q_value(grid.r(i), lambda, k);
  return p;
}

inline std::vector<double> eval_LambdaQ(double lambda, int k, const RadialGrid& grid,
                                        Rescaling scaling = Rescaling::EnergyInvariant) {
  if (!(lambda > 0.0)) throw std::invalid_argument("eval_LambdaQ: lambda must be > 0");
  std::vector<double> v(grid.size());
  const double amp = (scaling == Rescaling::L2Invariant) ? 1.0 / lambda : 1.0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    v[i] = amp * LambdaQ_value(grid.r(i), lambda, k);
  return v;
}

// C^2 cutoff: 1 on rho <= 1, 0 on rho >= 2 (quintic smoothstep in between).
inline double cutoff_chi(double rho) {
  if (rho <= 1.0) return 1.0;
  if (rho >= 2.0) return 0.0;
  const double x = rho - 1.0;
  return 1.0 - (10.0 * x * x * x - 15.0 * x * x * x * x + 6.0 * x * x * x * x * x);
}

// Z = chi * LambdaQ for k = 1, 2 and Z = LambdaQ for k >= 3, rescaled
// L2-invariantly: Z_lambda(r) = lambda^{-1} Z(r/lambda).
inline std::vector<double> eval_Z(double lambda, int k, const RadialGrid& grid) {
  if (!(lambda > 0.0)) throw std::invalid_argument("eval_Z: lambda must be > 0");
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double rho = grid.r(i) / lambda;
    double z = LambdaQ_value(grid.r(i), lambda, k);
    if (k <= 2) z *= cutoff_chi(rho);
    v[i] = z / lambda;
  }
  return v;
}

inline double multi_bubble_value(const BubbleConfig& c, double r) {
  double u = c.m * kPi;
  for (std::size_t j = 0; j < c.lambdas.size(); ++j)
    u += c.iotas[j] * Q_minus_pi(r, c.lambdas[j], c.k);
  return u;
}

inline RadialProfile multi_bubble(const BubbleConfig& c, const RadialGrid& grid) {
  c.check();
  RadialProfile p;
  p.grid = grid;
  p.k = c.k;
  p.ell = c.ell();
  p.m = c.m;
  p.values.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i)
    p.values[i] = multi_bubble_value(c, grid.r(i));
  return p;
}

// Analytic d/ds of the configuration: sum_j iota_j LambdaQ(r/lambda_j).
inline std::vector<double> multi_bubble_dds(const BubbleConfig& c,
                                            const RadialGrid& grid) {
  std::vector<double> d(grid.size(), 0.0);
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = 0; j < c.lambdas.size(); ++j)
      d[i] += c.iotas[j] * LambdaQ_value(grid.r(i), c.lambdas[j], c.k);
  return d;
}

// --- Energy expansion about a well-separated configuration -----------------

struct ExpansionReport {
  double computed = 0.0;   // energy() of the sampled configuration
  double predicted = 0.0;  // M E(Q) + 16 k pi sum iota_j iota_{j+1} q_j
  double residual = 0.0;   // computed - predicted
  std::vector<double> gap_ratios;  // q_j = (lambda_j/lambda_{j+1})^k
  bool in_regime = true;   // all scale ratios <= 0.1
};

inline ExpansionReport energy_expansion(const BubbleConfig& c, const RadialGrid& grid) {
  c.check();
  ExpansionReport rep;
  const std::size_t M = c.bubble_count();
  for (std::size_t j = 0; j + 1 < M; ++j) {
    const double ratio = c.lambdas[j] / c.lambdas[j + 1];
    if (ratio > 0.1) rep.in_regime = false;
    rep.gap_ratios.push_back(std::pow(ratio, c.k));
  }
  const auto prof = multi_bubble(c, grid);
  rep.computed = energy(prof).total;
  double interaction = 0.0;
  for (std::size_t j = 0; j + 1 < M; ++j)
    interaction += c.iotas[j] * c.iotas[j + 1] * rep.gap_ratios[j];
  rep.predicted = double(M) * 4.0 * kPi * c.k + 16.0 * c.k * kPi * interaction;
  rep.residual = rep.computed - rep.predicted;
  return rep;
}

// --- Cross-term integral ----------------------------------------------------
// \int_0^inf max(1, r/lambda)^{-alpha} max(1, mu/r)^{-beta} dr/r by composite
// Simpson in s = log r on the three smooth pieces (tails truncated where the
// integrand drops below 1e-20 of its plateau).

inline double cross_term_integral(double lambda, double mu, double alpha, double beta) {
  if (!(lambda > 0.0 && mu > 0.0 && lambda <= mu))
    throw std::invalid_argument("cross_term: require 0 < lambda <= mu");
  if (!(alpha > 0.0 && beta > 0.0))
    throw std::invalid_argument("cross_term: require alpha, beta > 0");
  const double sl = std::log(lambda), sm = std::log(mu);
  const auto f = [&](double s) {
    const double a = (s > sl) ? std::exp(-alpha * (s - sl)) : 1.0;
    const double b = (s < sm) ? std::exp(-beta * (sm - s)) : 1.0;
    return a * b;
  };
  const auto simpson = [&](double a, double b) {
    if (b <= a) return 0.0;
    // step chosen so (h*rate)^4/180 stays well below 1e-10
    const double rate = std::max(alpha, beta);
    const double h_target = 0.04 / std::max(rate, 1.0);
    std::size_t n = std::size_t((b - a) / h_target) + 2;
    if (n % 2 == 1) ++n;
    const double h = (b - a) / double(n);
    double acc = f(a) + f(b);
    for (std::size_t i = 1; i < n; ++i) acc += f(a + h * i) * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
  };
  const double tail_in = sl - (std::log(1e20)) / beta;   // inner tail cut
  const double tail_out = sm + (std::log(1e20)) / alpha;  // outer tail cut
  return simpson(tail_in, sl) + simpson(sl, sm) + simpson(sm, tail_out);
}

// --- Linearized quadratic forms ---------------------------------------------

// <D^2 E(Q(config)) g | g> = \int ((dg)^2 + (k^2/r^2) cos(2 Qbar) g^2) r dr,
// bare measure.
inline double quadratic_form(const BubbleConfig& c, const RadialProfile& qbar,
                             const std::vector<double>& g) {
  if (g.size() != qbar.size())
    throw std::invalid_argument("quadratic_form: grid mismatch");
  const double k2 = double(c.k) * double(c.k);
  const auto& uv = qbar.values;
  const auto w = detail::clamp_window(qbar.grid, 0.0,
                                      std::numeric_limits<double>::infinity());
  return detail::dual_quad(
      qbar.grid, g, w.s1, w.s2,
      [&](std::size_t i, double d) { return d * d + k2 * cos2(uv[i]) * g[i] * g[i]; },
      [&](std::size_t i, double d) {
        const double gm = 0.5 * (g[i] + g[i + 1]);
        const double qm = 0.5 * (uv[i] + uv[i + 1]);
        return d * d + k2 * cos2(qm) * gm * gm;
      });
}

inline double quadratic_form(const BubbleConfig& c, const RadialGrid& grid,
                             const std::vector<double>& g) {
  return quadratic_form(c, multi_bubble(c, grid), g);
}

// <DE(Q(config)) | g> = \int (dQbar dg + (k^2/r^2) f(Qbar) g) r dr with
// f(u) = sin(2u)/2. The configuration derivative is evaluated in closed form.
inline double de_pairing(const BubbleConfig& c, const RadialGrid& grid,
                         const std::vector<double>& g) {
  if (g.size() != grid.size()) throw std::invalid_argument("de_pairing: grid mismatch");
  const double k2 = double(c.k) * double(c.k);
  const auto qs = multi_bubble_dds(c, grid);
  const auto qb = multi_bubble(c, grid);
  const auto& s = grid.log_nodes();
  // Node trapezoid with centered dg/ds; the integrand is linear in g so the
  // plain rule suffices.
  const auto dg = detail::dds(grid, g);
  std::vector<double> fn(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i)
    fn[i] = qs[i] * dg[i] + k2 * 0.5 * sin2_reduced(qb.values[i]) * g[i];
  return detail::trapezoid_window(grid, fn, s.front(), s.back());
}

// --- Jia-Kenig virial functional ---------------------------------------------
// \int (k^2 sin^2(2u)/(2 r^2) + 2 (du)^2 cos(2u)) r dr; vanishes at every Q_lambda.
inline double virial(const RadialProfile& u) {
  const double k2 = double(u.k) * double(u.k);
  const auto& uv = u.values;
  const auto w = detail::clamp_window(u.grid, 0.0,
                                      std::numeric_limits<double>::infinity());
  return detail::dual_quad(
      u.grid, uv, w.s1, w.s2,
      [&](std::size_t i, double d) {
        const double s2 = sin2_reduced(uv[i]);
        return 0.5 * k2 * s2 * s2 + 2.0 * d * d * cos2(uv[i]);
      },
      [&](std::size_t i, double d) {
        const double um = 0.5 * (uv[i] + uv[i + 1]);
        const double s2 = sin2_reduced(um);
        return 0.5 * k2 * s2 * s2 + 2.0 * d * d * cos2(um);
      });
}

}  // namespace hmflow
