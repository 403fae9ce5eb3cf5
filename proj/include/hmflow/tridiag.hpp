#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace hmflow {

// Tridiagonal system a_i x_{i-1} + b_i x_i + c_i x_{i+1} = d_i, solved by the
// Thomas algorithm. No pivoting; callers must pass diagonally dominant or
// positive definite systems.
struct Tridiag {
  std::vector<double> lower;  // a_1..a_{n-1} (a_0 unused)
  std::vector<double> diag;   // b_0..b_{n-1}
  std::vector<double> upper;  // c_0..c_{n-2} (c_{n-1} unused)

  explicit Tridiag(std::size_t n) : lower(n, 0.0), diag(n, 0.0), upper(n, 0.0) {}

  std::size_t size() const { return diag.size(); }

  std::vector<double> solve(const std::vector<double>& rhs) const {
    const std::size_t n = size();
    if (rhs.size() != n) throw std::invalid_argument("tridiag: rhs size mismatch");
    std::vector<double> cp(n), dp(n), x(n);
    double m = diag[0];
    if (m == 0.0) throw std::runtime_error("tridiag: zero pivot");
    cp[0] = upper[0] / m;
    dp[0] = rhs[0] / m;
    for (std::size_t i = 1; i < n; ++i) {
      m = diag[i] - lower[i] * cp[i - 1];
      if (m == 0.0) throw std::runtime_error("tridiag: zero pivot");
      cp[i] = upper[i] / m;
      dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / m;
    }
    x[n - 1] = dp[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = dp[i] - cp[i] * x[i + 1];
    return x;
  }

  // y = M x
  std::vector<double> apply(const std::vector<double>& x) const {
    const std::size_t n = size();
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      double v = diag[i] * x[i];
      if (i > 0) v += lower[i] * x[i - 1];
      if (i + 1 < n) v += upper[i] * x[i + 1];
      y[i] = v;
    }
    return y;
  }
};

}  // namespace hmflow
