#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "rng.hpp"

namespace bdsde {

// Substream tags so the W and B components of one path never share a stream.
inline constexpr std::uint64_t kStreamW = 0x57;
inline constexpr std::uint64_t kStreamB = 0x42;

// One sample of the two independent driving paths on a dyadic grid, fully
// determined by (seed, path_index, grid).  Both increments and cumulative
// values are carried: values are the coupling currency (coarsening subsamples
// them, so shared grid times agree bit-for-bit across levels), increments are
// what the schemes consume.  Consumers read the carried arrays and never
// re-accumulate, which is what keeps the coupling exact.
struct BrownianPair {
  DyadicGrid grid;
  std::uint64_t seed = 0;
  std::int64_t path_index = 0;
  std::vector<double> w_increments;
  std::vector<double> b_increments;
  std::vector<double> w_values;  // size step_count + 1, w_values[0] = 0
  std::vector<double> b_values;
};

// Running sums, left to right: values[i] = sum of increments[0..i).
inline std::vector<double> cumulative_values(const std::vector<double>& increments) {
  std::vector<double> v(increments.size() + 1);
  v[0] = 0.0;
  for (std::size_t i = 0; i < increments.size(); ++i) v[i + 1] = v[i] + increments[i];
  return v;
}

inline BrownianPair sample_pair(std::uint64_t seed, std::int64_t path_index, const DyadicGrid& grid) {
  BrownianPair p;
  p.grid = grid;
  p.seed = seed;
  p.path_index = path_index;
  const double scale = std::sqrt(grid.mesh());
  RandomStream w(stream_key(seed, static_cast<std::uint64_t>(path_index), kStreamW));
  RandomStream b(stream_key(seed, static_cast<std::uint64_t>(path_index), kStreamB));
  p.w_increments.resize(static_cast<std::size_t>(grid.step_count));
  p.b_increments.resize(static_cast<std::size_t>(grid.step_count));
  for (auto& x : p.w_increments) x = scale * w.next_normal();
  for (auto& x : p.b_increments) x = scale * b.next_normal();
  p.w_values = cumulative_values(p.w_increments);
  p.b_values = cumulative_values(p.b_increments);
  return p;
}

// Coarse increments at to_level: differences of the fine left-to-right
// cumulative sums at the block boundaries (equal, up to final rounding, to
// summing each block's fine increments left to right).
inline std::vector<double> coarsen_increments(const std::vector<double>& fine, int from_level, int to_level) {
  if (to_level > from_level)
    throw ConfigError("cannot coarsen level " + std::to_string(from_level) +
                      " increments to finer level " + std::to_string(to_level));
  if (to_level < 0) throw ConfigError("coarsen target level must be nonnegative");
  const std::size_t stride = static_cast<std::size_t>(1) << (from_level - to_level);
  if (fine.size() % stride != 0)
    throw ConfigError("increment count " + std::to_string(fine.size()) +
                      " is not a multiple of the coarsening stride");
  const std::vector<double> cum = cumulative_values(fine);
  std::vector<double> out(fine.size() / stride);
  for (std::size_t j = 0; j < out.size(); ++j)
    out[j] = cum[(j + 1) * stride] - cum[j * stride];
  return out;
}

namespace detail {
inline std::vector<double> subsample(const std::vector<double>& values, std::size_t stride) {
  std::vector<double> out((values.size() - 1) / stride + 1);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = values[j * stride];
  return out;
}
inline std::vector<double> value_differences(const std::vector<double>& values) {
  std::vector<double> out(values.size() - 1);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = values[j + 1] - values[j];
  return out;
}
}  // namespace detail

inline BrownianPair coarsen(const BrownianPair& path, int to_level) {
  if (to_level > path.grid.level)
    throw ConfigError("cannot coarsen level " + std::to_string(path.grid.level) +
                      " path to finer level " + std::to_string(to_level));
  if (to_level < 0) throw ConfigError("coarsen target level must be nonnegative");
  if (to_level == path.grid.level) return path;  // identity, increments untouched
  const std::size_t stride = static_cast<std::size_t>(1) << (path.grid.level - to_level);
  BrownianPair p;
  p.grid = DyadicGrid::make(to_level, path.grid.horizon);
  p.seed = path.seed;
  p.path_index = path.path_index;
  p.w_values = detail::subsample(path.w_values, stride);
  p.b_values = detail::subsample(path.b_values, stride);
  p.w_increments = detail::value_differences(p.w_values);
  p.b_increments = detail::value_differences(p.b_values);
  return p;
}

}  // namespace bdsde
