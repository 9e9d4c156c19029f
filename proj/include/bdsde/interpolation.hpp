#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "brownian.hpp"
#include "errors.hpp"
#include "grid.hpp"

namespace bdsde {

// Piecewise-linear lookahead interpolation of B at dyadic level n, built over
// the cumulative values of a path at a finer level m >= n.  On the interval
// [k, k+1)*2^-n the interpolant joins B((k+1)*2^-n) to B((k+2)*2^-n), so the
// slope on each interval is measurable with respect to the future of B.  The
// path is frozen at its terminal value beyond the horizon: the last interval
// is flat and the interpolant at T equals B(T) exactly.
class InterpolatedNoise {
 public:
  InterpolatedNoise(const std::vector<double>& fine_values, const DyadicGrid& fine_grid, int wz_level)
      : fine_(&fine_values), fine_grid_(fine_grid), level_(wz_level) {
    if (wz_level < 0) throw ConfigError("interpolation level must be nonnegative");
    if (wz_level > fine_grid.level)
      throw ConfigError("interpolation level " + std::to_string(wz_level) +
                        " exceeds the path level " + std::to_string(fine_grid.level));
    if (fine_values.size() != static_cast<std::size_t>(fine_grid.step_count) + 1)
      throw ConfigError("cumulative value count does not match the grid");
    stride_ = static_cast<std::int64_t>(1) << (fine_grid.level - wz_level);
    intervals_ = fine_grid.step_count / stride_;
  }

  int level() const { return level_; }
  std::int64_t interval_count() const { return intervals_; }

  // B at the level point j * 2^-level, frozen at the horizon for j beyond it.
  double level_point(std::int64_t j) const {
    std::int64_t idx = j * stride_;
    if (idx > fine_grid_.step_count) idx = fine_grid_.step_count;
    return (*fine_)[static_cast<std::size_t>(idx)];
  }

  double value(double t) const {
    const std::int64_t k = interval_index(t, level_, fine_grid_.horizon);
    const double offset = std::ldexp(t, level_) - static_cast<double>(k);  // exact scaling
    if (offset == 0.0) return level_point(k + 1);  // grid point: direct lookup, continuity is exact
    const double b1 = level_point(k + 1);
    const double b2 = level_point(k + 2);
    return b2 + (offset - 1.0) * (b2 - b1);
  }

  double slope(double t) const {
    const std::int64_t k = interval_index(t, level_, fine_grid_.horizon);
    return slope_on_interval(k);
  }

  double slope_on_interval(std::int64_t k) const {
    const double b1 = level_point(k + 1);
    const double b2 = level_point(k + 2);
    return std::ldexp(b2 - b1, level_);
  }

 private:
  const std::vector<double>* fine_;
  DyadicGrid fine_grid_;
  int level_;
  std::int64_t stride_;
  std::int64_t intervals_;
};

// Largest gap max-min of `values` over any window of `width` consecutive
// intervals, via monotonic deques in O(n).
inline double max_window_gap(const std::vector<double>& values, std::size_t width) {
  std::deque<std::size_t> hi, lo;
  double best = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    while (!hi.empty() && values[hi.back()] <= values[i]) hi.pop_back();
    hi.push_back(i);
    while (!lo.empty() && values[lo.back()] >= values[i]) lo.pop_back();
    lo.push_back(i);
    if (i >= width + 1) {
      const std::size_t cutoff = i - width - 1;
      while (hi.front() <= cutoff) hi.pop_front();
      while (lo.front() <= cutoff) lo.pop_front();
    }
    const double gap = values[hi.front()] - values[lo.front()];
    if (gap > best) best = gap;
  }
  return best;
}

// Monte Carlo estimate of E[ sup |B_r - B_s|^p : |r - s| <= 2^-n ] with the
// sup taken over the paths' own grid times.
inline double modulus_stat(const std::vector<BrownianPair>& paths, int n, double p) {
  if (paths.empty()) throw ConfigError("modulus_stat needs at least one path");
  double acc = 0.0;
  for (const auto& path : paths) {
    if (n > path.grid.level)
      throw ConfigError("modulus window level " + std::to_string(n) +
                        " is finer than the path level " + std::to_string(path.grid.level));
    const std::size_t width = static_cast<std::size_t>(1) << (path.grid.level - n);
    acc += std::pow(max_window_gap(path.b_values, width), p);
  }
  return acc / static_cast<double>(paths.size());
}

}  // namespace bdsde
