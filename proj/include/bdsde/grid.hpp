#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "errors.hpp"

namespace bdsde {

// Uniform dyadic grid on [0, horizon]: times i * 2^-level for i = 0..step_count.
// horizon * 2^level must be an integer so every grid time is exact in binary.
struct DyadicGrid {
  int level = 0;
  double horizon = 1.0;
  std::int64_t step_count = 1;

  static DyadicGrid make(int level, double horizon = 1.0) {
    if (level < 0 || level > 30)
      throw ConfigError("grid level must lie in [0, 30], got " + std::to_string(level));
    if (!(horizon > 0.0) || !std::isfinite(horizon))
      throw ConfigError("horizon must be positive and finite");
    const double scaled = std::ldexp(horizon, level);
    if (scaled != std::floor(scaled) || scaled < 1.0 || scaled > 4.0e15)
      throw ConfigError("horizon " + std::to_string(horizon) + " is not dyadic at level " +
                        std::to_string(level));
    DyadicGrid g;
    g.level = level;
    g.horizon = horizon;
    g.step_count = static_cast<std::int64_t>(scaled);
    return g;
  }

  double mesh() const { return std::ldexp(1.0, -level); }

  // exact: dyadic rationals scale by powers of two without rounding
  double time_at(std::int64_t i) const { return std::ldexp(static_cast<double>(i), -level); }
};

// Index k of the half-open level interval [k, k+1)*2^-level containing t;
// t == horizon maps into the last interval.
inline std::int64_t interval_index(double t, int level, double horizon) {
  if (!(t >= 0.0) || !(t <= horizon))
    throw std::domain_error("time " + std::to_string(t) + " outside [0, " + std::to_string(horizon) + "]");
  const double scaled = std::ldexp(t, level);  // exact scaling
  std::int64_t k = static_cast<std::int64_t>(std::floor(scaled));
  const std::int64_t last = static_cast<std::int64_t>(std::ldexp(horizon, level)) - 1;
  if (k > last) k = last;
  return k;
}

// Two-steps-ahead dyadic neighbor of t's interval, clamped to the horizon
// when clamp is set (the convention that freezes the noise at its terminal value).
inline double s_plus(double t, int level, double horizon, bool clamp = true) {
  const std::int64_t k = interval_index(t, level, horizon);
  const double s = std::ldexp(static_cast<double>(k + 2), -level);
  return clamp && s > horizon ? horizon : s;
}

// One-step-back dyadic neighbor, floored at 0.
inline double s_minus(double t, int level, double horizon) {
  const std::int64_t k = interval_index(t, level, horizon);
  return k < 1 ? 0.0 : std::ldexp(static_cast<double>(k - 1), -level);
}

}  // namespace bdsde
