#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <vector>

#include "hmflow/bubbles.hpp"
#include "hmflow/grid.hpp"
#include "hmflow/tridiag.hpp"

namespace hmflow {

struct CoercivityReport {
  double constrained_min = 0.0;
  double unconstrained_min = 0.0;
  std::vector<double> minimizer;           // interior-node values, Dirichlet ends
  std::vector<double> constraint_residuals;  // <Z_lambda_j | g> at the minimizer
  int iterations = 0;
  bool converged = false;
  double r_max = 0.0;  // recorded: the k=1 constrained minimum is domain-dependent
};

namespace detail {

// P1 finite-element forms in s on the interior nodes (Dirichlet ends):
//   B  ~ ||g||_E^2   = int (g_s^2 + k^2 g^2) ds
//   A  ~ <L_Q g | g> = int (g_s^2 + k^2 cos(2 Qbar) g^2) ds
// with a lumped (trapezoidal) potential term.
struct RayleighForms {
  Tridiag A, B;
  std::vector<std::vector<double>> constraints;  // rows c: c.x = <Z|g>
};

inline RayleighForms assemble_forms(const BubbleConfig& c, const RadialGrid& grid) {
  const std::size_t n = grid.size();
  const std::size_t ni = n - 2;
  const auto& s = grid.log_nodes();
  const double k2 = double(c.k) * double(c.k);
  const auto qbar = multi_bubble(c, grid);

  RayleighForms F{Tridiag(ni), Tridiag(ni), {}};
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const std::size_t j = i - 1;
    const double hl = s[i] - s[i - 1], hr = s[i + 1] - s[i];
    const double lump = 0.5 * (hl + hr);
    const double stiff = 1.0 / hl + 1.0 / hr;
    F.B.diag[j] = stiff + k2 * lump;
    F.A.diag[j] = stiff + k2 * cos2(qbar.values[i]) * lump;
    if (j > 0) {
      F.A.lower[j] = F.B.lower[j] = -1.0 / hl;
    }
    if (j + 1 < ni) {
      F.A.upper[j] = F.B.upper[j] = -1.0 / hr;
    }
  }
  for (std::size_t b = 0; b < c.lambdas.size(); ++b) {
    const auto z = eval_Z(c.lambdas[b], c.k, grid);
    std::vector<double> row(ni);
    const auto& w = grid.weights();
    for (std::size_t i = 1; i + 1 < n; ++i) row[i - 1] = w[i] * z[i];
    F.constraints.push_back(std::move(row));
  }
  return F;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace detail

// Lowest Rayleigh quotient <L_Q g|g> / ||g||_E^2 of the discretized linearized
// operator, unconstrained and restricted to the Z-orthogonal complement, via
// shifted inverse iteration with per-iteration constraint projection (B-metric).
inline CoercivityReport coercivity_constant(const std::vector<double>& lambdas,
                                            const std::vector<int>& iotas, int k,
                                            int m, const RadialGrid& grid,
                                            int max_iters = 20000,
                                            double tol = 1e-11) {
  BubbleConfig c{m, iotas, lambdas, k};
  c.check();
  // Smallness gate: sum (lambda_j/lambda_{j+1})^k <= eta^2 (default 0.01).
  double gaps = 0.0;
  for (std::size_t j = 0; j + 1 < lambdas.size(); ++j)
    gaps += std::pow(lambdas[j] / lambdas[j + 1], k);
  if (gaps > 0.01)
    throw std::invalid_argument("coercivity: scales outside the smallness regime");

  auto F = detail::assemble_forms(c, grid);
  const std::size_t ni = F.A.size();

  // A + 2B is positive definite (A >= -B discretely), used as the inverse
  // iteration operator for both minima.
  Tridiag M(ni);
  for (std::size_t i = 0; i < ni; ++i) {
    M.diag[i] = F.A.diag[i] + 2.0 * F.B.diag[i];
    M.lower[i] = F.A.lower[i] + 2.0 * F.B.lower[i];
    M.upper[i] = F.A.upper[i] + 2.0 * F.B.upper[i];
  }

  // B-orthonormal basis of span{B^{-1} c_j}; projecting against it enforces
  // c_j . x = 0 while staying symmetric in the B inner product.
  std::vector<std::vector<double>> basis;
  for (const auto& row : F.constraints) {
    auto v = F.B.solve(row);
    for (const auto& u : basis) {
      const double coef = detail::dot(u, F.B.apply(v));
      for (std::size_t i = 0; i < ni; ++i) v[i] -= coef * u[i];
    }
    const double nb = std::sqrt(detail::dot(v, F.B.apply(v)));
    if (!(nb > 0.0)) throw std::runtime_error("coercivity: degenerate constraint");
    for (auto& x : v) x /= nb;
    basis.push_back(std::move(v));
  }

  const auto run = [&](bool constrained, std::vector<double>& out_x, int& iters,
                       bool& conv) {
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> gauss;
    std::vector<double> x(ni);
    for (auto& v : x) v = gauss(rng);
    const auto project = [&](std::vector<double>& y) {
      if (!constrained) return;
      const auto By = F.B.apply(y);
      std::vector<double> coefs(basis.size());
      for (std::size_t b = 0; b < basis.size(); ++b)
        coefs[b] = detail::dot(basis[b], By);
      for (std::size_t b = 0; b < basis.size(); ++b)
        for (std::size_t i = 0; i < ni; ++i) y[i] -= coefs[b] * basis[b][i];
    };
    project(x);
    double theta = 0.0;
    conv = false;
    for (iters = 0; iters < max_iters; ++iters) {
      auto y = M.solve(F.B.apply(x));
      project(y);
      const double nb = std::sqrt(detail::dot(y, F.B.apply(y)));
      for (auto& v : y) v /= nb;
      const double tn = detail::dot(y, F.A.apply(y)) / detail::dot(y, F.B.apply(y));
      x = std::move(y);
      if (iters > 4 && std::abs(tn - theta) < tol * std::max(1.0, std::abs(tn))) {
        theta = tn;
        conv = true;
        break;
      }
      theta = tn;
    }
    out_x = x;
    return theta;
  };

  CoercivityReport rep;
  std::vector<double> xg;
  int it1 = 0, it2 = 0;
  bool c1 = false, c2 = false;
  rep.unconstrained_min = run(false, xg, it1, c1);
  rep.constrained_min = run(true, rep.minimizer, it2, c2);
  rep.iterations = it1 + it2;
  rep.converged = c1 && c2;
  if (!rep.converged)
    throw std::runtime_error("coercivity: inverse iteration did not converge");
  for (const auto& row : F.constraints)
    rep.constraint_residuals.push_back(detail::dot(row, rep.minimizer));
  rep.r_max = grid.r_max();
  return rep;
}

}  // namespace hmflow
