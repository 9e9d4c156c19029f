#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "brownian.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "interpolation.hpp"
#include "problem.hpp"
#include "regression.hpp"

namespace bdsde {

enum class Scheme { reference, wong_zakai };

struct SolverConfig {
  RegressionBasis basis;
  int picard_iters = 1;

  void validate() const {
    basis.validate();
    if (picard_iters < 0 || picard_iters > 50)
      throw ConfigError("picard_iters must lie in [0, 50], got " + std::to_string(picard_iters));
  }
};

// All noise one backward solve consumes: a single backward driving path shared
// across the cross-section, and a cross-section of forward paths stored
// time-major so each step reads contiguous rows.
struct ScenarioNoise {
  DyadicGrid grid;
  std::int64_t outer_index = 0;
  std::vector<double> b_values;                   // size step_count + 1
  std::vector<double> b_increments;               // size step_count
  std::vector<std::vector<double>> w_values;      // [time][path], step_count + 1 rows
  std::vector<std::vector<double>> w_increments;  // [step][path], step_count rows

  std::size_t path_count() const { return w_values.empty() ? 0 : w_values[0].size(); }
};

// Forward-path index for inner path p of outer scenario b; outer scenarios use
// the backward side of path index b directly.
inline std::int64_t inner_path_index(std::int64_t outer_index, std::int64_t inner) {
  return ((outer_index + 1) << 32) + inner;
}

inline ScenarioNoise make_scenario(std::uint64_t seed, std::int64_t outer_index,
                                   std::int64_t inner_count, const DyadicGrid& grid) {
  if (outer_index < 0) throw ConfigError("outer scenario index must be nonnegative");
  if (inner_count <= 0 || inner_count >= (std::int64_t{1} << 32))
    throw ConfigError("inner path count must lie in [1, 2^32)");
  ScenarioNoise s;
  s.grid = grid;
  s.outer_index = outer_index;
  {
    BrownianPair outer = sample_pair(seed, outer_index, grid);
    s.b_values = std::move(outer.b_values);
    s.b_increments = std::move(outer.b_increments);
  }
  const auto steps = static_cast<std::size_t>(grid.step_count);
  const auto count = static_cast<std::size_t>(inner_count);
  s.w_values.assign(steps + 1, std::vector<double>(count));
  s.w_increments.assign(steps, std::vector<double>(count));
  for (std::size_t p = 0; p < count; ++p) {
    const BrownianPair pair =
        sample_pair(seed, inner_path_index(outer_index, static_cast<std::int64_t>(p)), grid);
    for (std::size_t i = 0; i <= steps; ++i) s.w_values[i][p] = pair.w_values[i];
    for (std::size_t i = 0; i < steps; ++i) s.w_increments[i][p] = pair.w_increments[i];
  }
  return s;
}

// Same subsampling rule as coarsening a single path: values at shared times
// are copied bitwise, increments are differences of the kept values.
inline ScenarioNoise coarsen_scenario(const ScenarioNoise& fine, int to_level) {
  if (to_level > fine.grid.level)
    throw ConfigError("cannot coarsen level " + std::to_string(fine.grid.level) +
                      " scenario to finer level " + std::to_string(to_level));
  if (to_level < 0) throw ConfigError("coarsen target level must be nonnegative");
  if (to_level == fine.grid.level) return fine;
  const std::size_t stride = static_cast<std::size_t>(1) << (fine.grid.level - to_level);
  ScenarioNoise s;
  s.grid = DyadicGrid::make(to_level, fine.grid.horizon);
  s.outer_index = fine.outer_index;
  s.b_values = detail::subsample(fine.b_values, stride);
  s.b_increments = detail::value_differences(s.b_values);
  const auto steps = static_cast<std::size_t>(s.grid.step_count);
  const std::size_t count = fine.path_count();
  s.w_values.resize(steps + 1);
  for (std::size_t j = 0; j <= steps; ++j) s.w_values[j] = fine.w_values[j * stride];
  s.w_increments.assign(steps, std::vector<double>(count));
  for (std::size_t j = 0; j < steps; ++j)
    for (std::size_t p = 0; p < count; ++p)
      s.w_increments[j][p] = s.w_values[j + 1][p] - s.w_values[j][p];
  return s;
}

struct BackwardSolution {
  Scheme scheme = Scheme::reference;
  int wz_level = -1;  // interpolation level for the piecewise-linear scheme, -1 otherwise
  int grid_level = 0;
  std::int64_t outer_index = 0;
  std::vector<std::vector<double>> y;  // [time][path]
  std::vector<std::vector<double>> z;  // [time][path]; terminal row repeats the last step
};

struct StepResult {
  std::vector<double> y, z;
};

namespace detail {

inline void require_finite(const std::vector<double>& values, const char* what,
                           std::size_t step_index) {
  for (double v : values)
    if (!std::isfinite(v))
      throw NumericalError(std::string("non-finite ") + what + " at backward step " +
                           std::to_string(step_index) + "; the iteration blew up");
}

// Single backward step shared by both schemes, so coupled runs differ only
// through the backward increment db and the presence of the 0.5*g*g' mesh
// term.  The conditional-expectation targets subtract the projected mean of
// the next value and the projected slope times the forward increment; both
// subtractions have zero conditional mean, so the estimators are unchanged in
// population while the coupled sampling noise cancels pathwise.
inline void backward_step(const BdsdeProblem& problem, const std::vector<double>& features,
                          const std::vector<double>& y_next, const std::vector<double>& dw,
                          double dt, double db, bool correction_on, const SolverConfig& config,
                          std::size_t step_index, std::vector<double>& y_out,
                          std::vector<double>& z_out) {
  const std::size_t count = y_next.size();
  if (features.size() != count || dw.size() != count)
    throw ConfigError("step inputs must have one entry per inner path");

  // A constant feature row (time zero, where every forward path sits at the
  // origin) carries no information: condition on constants alone instead of
  // feeding the projector rank-deficient columns.
  RegressionBasis step_basis = config.basis;
  const auto [row_min, row_max] = std::minmax_element(features.begin(), features.end());
  if (*row_min == *row_max) {
    step_basis.kind = RegressionBasis::Kind::polynomial;
    step_basis.degree_or_bins = 0;
  }
  const FeatureProjector projector(features, step_basis);

  const RegressionFit fit_y = projector.project(y_next);
  std::vector<double> targets(count);
  for (std::size_t p = 0; p < count; ++p)
    targets[p] = (y_next[p] - fit_y.fitted[p]) * dw[p] / dt;
  RegressionFit fit_z = projector.project(targets);
  z_out = std::move(fit_z.fitted);
  require_finite(z_out, "z estimate", step_index);

  for (std::size_t p = 0; p < count; ++p) {
    const double yn = y_next[p];
    targets[p] = yn + problem.diffusion.g(yn) * db +
                 (correction_on ? correction(problem.diffusion, yn) * dt : 0.0) -
                 z_out[p] * dw[p];
  }
  const RegressionFit fit_e = projector.project(targets);

  y_out.resize(count);
  for (std::size_t p = 0; p < count; ++p)
    y_out[p] = fit_e.fitted[p] + problem.driver.f(fit_y.fitted[p], z_out[p]) * dt;
  for (int it = 0; it < config.picard_iters; ++it)
    for (std::size_t p = 0; p < count; ++p)
      y_out[p] = fit_e.fitted[p] + problem.driver.f(y_out[p], z_out[p]) * dt;
  require_finite(y_out, "y estimate", step_index);
}

}  // namespace detail

// One backward step of the corrected equation: right-endpoint backward
// increment g(y_next)*db plus the 0.5*g*g' mesh term.
inline StepResult step_reference(const BdsdeProblem& problem, std::size_t time_index,
                                 const std::vector<double>& features,
                                 const std::vector<double>& y_next,
                                 const std::vector<double>& dw, double db, double dt,
                                 const SolverConfig& config) {
  config.validate();
  StepResult r;
  detail::backward_step(problem, features, y_next, dw, dt, db, true, config, time_index, r.y,
                        r.z);
  return r;
}

// One backward step of the interpolated-noise equation: the increment is the
// interpolation slope times the mesh and no correction term is added.
inline StepResult step_wongzakai(const BdsdeProblem& problem, std::size_t time_index,
                                 const std::vector<double>& features,
                                 const std::vector<double>& y_next,
                                 const std::vector<double>& dw, double slope, double dt,
                                 const SolverConfig& config) {
  config.validate();
  StepResult r;
  detail::backward_step(problem, features, y_next, dw, dt, slope * dt, false, config, time_index,
                        r.y, r.z);
  return r;
}

// Least-squares backward induction over the whole grid for one scenario.
inline BackwardSolution solve(const BdsdeProblem& problem, Scheme scheme, int wz_level,
                              const ScenarioNoise& noise, const SolverConfig& config) {
  config.validate();
  const DyadicGrid& grid = noise.grid;
  if (grid.horizon != problem.horizon)
    throw ConfigError("scenario horizon does not match problem horizon");
  const auto steps = static_cast<std::size_t>(grid.step_count);
  const std::size_t count = noise.path_count();
  if (noise.b_values.size() != steps + 1 || noise.b_increments.size() != steps ||
      noise.w_values.size() != steps + 1 || noise.w_increments.size() != steps)
    throw ConfigError("scenario arrays do not match the scenario grid");
  if (static_cast<std::int64_t>(count) <= config.basis.dimension())
    throw NumericalError("backward solve needs more forward paths than the basis dimension " +
                         std::to_string(config.basis.dimension()) + ", got " +
                         std::to_string(count));
  const double dt = grid.mesh();

  // effective backward increment per step, shared across the cross-section
  std::vector<double> db;
  bool correction_on = false;
  if (scheme == Scheme::reference) {
    db = noise.b_increments;
    correction_on = true;
  } else {
    if (wz_level < 0 || wz_level > grid.level)
      throw ConfigError("interpolation level must lie in [0, " + std::to_string(grid.level) +
                        "], got " + std::to_string(wz_level));
    const InterpolatedNoise interp(noise.b_values, grid, wz_level);
    const int shift = grid.level - wz_level;
    db.resize(steps);
    for (std::size_t i = 0; i < steps; ++i)
      db[i] = interp.slope_on_interval(static_cast<std::int64_t>(i >> shift)) * dt;
  }

  BackwardSolution sol;
  sol.scheme = scheme;
  sol.wz_level = scheme == Scheme::wong_zakai ? wz_level : -1;
  sol.grid_level = grid.level;
  sol.outer_index = noise.outer_index;
  sol.y.assign(steps + 1, std::vector<double>(count));
  sol.z.assign(steps + 1, std::vector<double>(count));
  for (std::size_t p = 0; p < count; ++p)
    sol.y[steps][p] = problem.terminal(noise.w_values[steps][p]);
  detail::require_finite(sol.y[steps], "terminal value", steps);

  for (std::size_t i = steps; i-- > 0;)
    detail::backward_step(problem, noise.w_values[i], sol.y[i + 1], noise.w_increments[i], dt,
                          db[i], correction_on, config, i, sol.y[i], sol.z[i]);
  sol.z[steps] = sol.z[steps - 1];
  return sol;
}

// Pathwise moment functional of one solution: sup over grid times of |y|^p
// plus the mesh-weighted sum of z^2 raised to p/2, averaged across paths.
inline double moment_functional(const BackwardSolution& sol, double p) {
  if (sol.y.empty() || sol.y[0].empty()) throw ConfigError("moment of an empty solution");
  const std::size_t steps = sol.y.size() - 1;
  const std::size_t count = sol.y[0].size();
  const double mesh = std::ldexp(1.0, -sol.grid_level);
  double acc = 0.0;
  for (std::size_t pth = 0; pth < count; ++pth) {
    double sup_y = 0.0, z_int = 0.0;
    for (std::size_t i = 0; i <= steps; ++i) {
      sup_y = std::max(sup_y, std::abs(sol.y[i][pth]));
      if (i < steps) z_int += mesh * sol.z[i][pth] * sol.z[i][pth];
    }
    acc += std::pow(sup_y, p) + std::pow(z_int, p / 2.0);
  }
  return acc / static_cast<double>(count);
}

}  // namespace bdsde
