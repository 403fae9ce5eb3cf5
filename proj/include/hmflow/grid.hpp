#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace hmflow {

// Local refinement band: node density inside [r_lo, r_hi] is `factor` times
// the base density (per log-decade).
struct RefinementBand {
  double r_lo = 0.0;
  double r_hi = 0.0;
  double factor = 1.0;
};

// Radial grid, logarithmic with optional refinement bands, carrying
// trapezoidal quadrature weights for the measure r dr (assembled in the log
// variable s = log r with the r^2 Jacobian folded in).
class RadialGrid {
 public:
  RadialGrid() = default;

  RadialGrid(std::vector<double> log_nodes_) : s_(std::move(log_nodes_)) {
    if (s_.size() < 2) throw std::invalid_argument("grid: need at least 2 nodes");
    r_.resize(s_.size());
    for (std::size_t i = 0; i < s_.size(); ++i) {
      r_[i] = std::exp(s_[i]);
      if (i > 0 && s_[i] <= s_[i - 1])
        throw std::invalid_argument("grid: nodes not strictly increasing");
    }
    build_weights();
  }

  std::size_t size() const { return r_.size(); }
  const std::vector<double>& nodes() const { return r_; }
  const std::vector<double>& log_nodes() const { return s_; }
  const std::vector<double>& weights() const { return w_; }
  double r_min() const { return r_.front(); }
  double r_max() const { return r_.back(); }
  double r(std::size_t i) const { return r_[i]; }
  double s(std::size_t i) const { return s_[i]; }

  bool same_nodes(const RadialGrid& o) const {
    return r_.size() == o.r_.size() && std::equal(s_.begin(), s_.end(), o.s_.begin());
  }

  // Largest index i with s_i <= s (clamped to [0, n-2]).
  std::size_t segment_of(double s) const {
    auto it = std::upper_bound(s_.begin(), s_.end(), s);
    std::size_t i = (it == s_.begin()) ? 0 : std::size_t(it - s_.begin()) - 1;
    return std::min(i, s_.size() - 2);
  }

 private:
  void build_weights() {
    const std::size_t n = s_.size();
    w_.assign(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double ds = s_[i + 1] - s_[i];
      w_[i] += 0.5 * ds * r_[i] * r_[i];
      w_[i + 1] += 0.5 * ds * r_[i + 1] * r_[i + 1];
    }
  }

  std::vector<double> r_, s_, w_;
};

// Log-uniform grid on [r_min, r_max] with n nodes, optionally densified
// inside refinement bands. Band interiors stay log-uniform at the boosted
// density; the total node count is n.
inline RadialGrid make_grid(double r_min, double r_max, std::size_t n,
                            const std::vector<RefinementBand>& bands = {}) {
  if (!(r_min > 0.0) || !(r_min < r_max))
    throw std::invalid_argument("make_grid: require 0 < r_min < r_max");
  if (n < 16) throw std::invalid_argument("make_grid: require n >= 16");
  for (const auto& b : bands) {
    if (!(b.r_lo >= r_min && b.r_hi <= r_max && b.r_lo < b.r_hi))
      throw std::invalid_argument("make_grid: refinement band outside domain");
    if (!(b.factor >= 1.0))
      throw std::invalid_argument("make_grid: band factor must be >= 1");
  }

  const double s_lo = std::log(r_min), s_hi = std::log(r_max);
  if (bands.empty()) {
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i)
      s[i] = s_lo + (s_hi - s_lo) * double(i) / double(n - 1);
    s.back() = s_hi;
    return RadialGrid(std::move(s));
  }

  // Piecewise-constant density in s: breakpoints from band edges, density =
  // max factor of covering bands.
  std::vector<double> brk{s_lo, s_hi};
  for (const auto& b : bands) {
    brk.push_back(std::log(b.r_lo));
    brk.push_back(std::log(b.r_hi));
  }
  std::sort(brk.begin(), brk.end());
  brk.erase(std::unique(brk.begin(), brk.end(),
                        [](double a, double b) { return std::abs(a - b) < 1e-14; }),
            brk.end());

  struct Piece {
    double a, b, dens;
  };
  std::vector<Piece> pieces;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < brk.size(); ++i) {
    const double mid = 0.5 * (brk[i] + brk[i + 1]);
    double dens = 1.0;
    for (const auto& band : bands)
      if (mid >= std::log(band.r_lo) && mid <= std::log(band.r_hi))
        dens = std::max(dens, band.factor);
    pieces.push_back({brk[i], brk[i + 1], dens});
    total += dens * (brk[i + 1] - brk[i]);
  }

  // Distribute n-1 segments proportionally to density * length, at least one
  // segment per piece.
  const std::size_t nseg = n - 1;
  std::vector<std::size_t> cnt(pieces.size(), 1);
  std::size_t used = pieces.size();
  if (used > nseg) throw std::invalid_argument("make_grid: too few nodes for bands");
  std::vector<double> frac(pieces.size());
  for (std::size_t i = 0; i < pieces.size(); ++i)
    frac[i] = pieces[i].dens * (pieces[i].b - pieces[i].a) / total;
  // Largest-remainder apportionment of the remaining segments.
  std::vector<double> want(pieces.size());
  std::size_t rem = nseg - used;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const std::size_t add = std::size_t(frac[i] * double(rem));
    cnt[i] += add;
    want[i] = frac[i] * double(rem) - double(add);
    assigned += add;
  }
  while (assigned < rem) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < pieces.size(); ++i)
      if (want[i] > want[best]) best = i;
    cnt[best] += 1;
    want[best] = -1.0;
    ++assigned;
  }

  std::vector<double> s;
  s.reserve(n);
  s.push_back(s_lo);
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    for (std::size_t j = 1; j <= cnt[i]; ++j)
      s.push_back(pieces[i].a +
                  (pieces[i].b - pieces[i].a) * double(j) / double(cnt[i]));
  }
  s.back() = s_hi;
  return RadialGrid(std::move(s));
}

}  // namespace hmflow
