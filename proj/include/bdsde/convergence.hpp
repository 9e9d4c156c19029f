#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "interpolation.hpp"
#include "parallel.hpp"
#include "problem.hpp"
#include "solver.hpp"

namespace bdsde {

struct ExperimentPlan {
  std::string problem_name = "sine_g";
  std::vector<int> levels = {3, 4, 5, 6, 7};
  int extra_levels = 2;  // each level n solves on grid level n + extra_levels
  std::int64_t outer_count = 64;
  std::int64_t inner_count = 2048;
  SolverConfig solver;
  std::uint64_t seed = 42;
  double delta_slack = 0.1;
  int workers = 1;  // 0 = auto
  double horizon = 1.0;

  int generation_level() const { return levels.back() + extra_levels; }
  int grid_level_for(int n) const { return n + extra_levels; }

  void validate() const {
    if (levels.empty()) throw ConfigError("experiment needs at least one level");
    for (std::size_t l = 0; l < levels.size(); ++l) {
      if (levels[l] < 0) throw ConfigError("levels must be nonnegative");
      if (l > 0 && levels[l] <= levels[l - 1])
        throw ConfigError("levels must be strictly increasing");
    }
    if (extra_levels < 0)
      throw ConfigError("extra_levels must be nonnegative, got " +
                        std::to_string(extra_levels) +
                        " (the solver grid cannot be coarser than the interpolation level)");
    if (outer_count < 2) throw ConfigError("outer_count must be at least 2");
    // note: inner_count vs basis dimension is the solver's own precondition; it
    // surfaces as a numerical failure, not a configuration error
    if (inner_count < 1) throw ConfigError("inner_count must be positive");
    if (inner_count >= (std::int64_t{1} << 32))
      throw ConfigError("inner_count must be below 2^32");
    if (!(delta_slack > 0.0) || !(delta_slack < 0.5))
      throw ConfigError("delta_slack must lie strictly inside (0, 0.5)");
    solver.validate();
    resolve_worker_count(workers);
    (void)DyadicGrid::make(generation_level(), horizon);  // validates level range and horizon
  }
};

struct LevelError {
  int level = 0;       // interpolation level n
  int grid_level = 0;  // solver grid level m
  double sup_y_err2 = 0.0;
  double sup_y_err2_se = 0.0;
  std::int64_t argmax_time_index = 0;
  double z_err_int = 0.0;
  double z_err_int_se = 0.0;

  double composite() const { return sup_y_err2 + z_err_int; }
};

struct ConvergenceReport {
  std::string problem;
  std::int64_t outer_count = 0;
  std::int64_t inner_count = 0;
  std::uint64_t seed = 0;
  double delta_slack = 0.1;
  std::vector<LevelError> rows;
};

namespace detail {

inline double sample_se(const std::vector<double>& values, double mean) {
  const auto count = static_cast<double>(values.size());
  double acc = 0.0;
  for (double v : values) acc += (v - mean) * (v - mean);
  return std::sqrt(acc / (count - 1.0) / count);
}

template <class Body>
void tagged_solve(int level, std::int64_t outer, Body&& body) {
  try {
    body();
  } catch (const NumericalError& e) {
    throw NumericalError(std::string(e.what()) + " (level " + std::to_string(level) +
                         ", outer " + std::to_string(outer) + ")");
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(e.what()) + " (level " + std::to_string(level) + ", outer " +
                      std::to_string(outer) + ")");
  }
}

}  // namespace detail

// Common-random-number error metric across levels: for each outer scenario the
// reference and interpolated equations are solved on the same grid with the
// same inner ensemble; squared differences are averaged over inner paths, then
// across outer scenarios.  The Y part takes the sup over grid times after the
// outer average (argmax recorded); the Z part is the mesh-weighted time sum.
// Standard errors come from the outer-scenario sample variance at the argmax.
inline ConvergenceReport estimate_errors(const BdsdeProblem& problem,
                                         const ExperimentPlan& plan) {
  plan.validate();
  if (problem.horizon != plan.horizon)
    throw ConfigError("plan horizon does not match problem horizon");
  const auto level_count = plan.levels.size();
  const auto outer = static_cast<std::size_t>(plan.outer_count);
  const DyadicGrid gen_grid = DyadicGrid::make(plan.generation_level(), plan.horizon);

  // per-(level, outer) slots written by exactly one task each
  std::vector<std::vector<std::vector<double>>> y_means(level_count);
  std::vector<std::vector<double>> z_sums(level_count, std::vector<double>(outer, 0.0));
  for (std::size_t l = 0; l < level_count; ++l) {
    const auto grid = DyadicGrid::make(plan.grid_level_for(plan.levels[l]), plan.horizon);
    y_means[l].assign(outer, std::vector<double>(static_cast<std::size_t>(grid.step_count) + 1,
                                                 0.0));
  }

  parallel_for_index(plan.outer_count, plan.workers, [&](std::int64_t b) {
    const ScenarioNoise fine = make_scenario(plan.seed, b, plan.inner_count, gen_grid);
    for (std::size_t l = 0; l < level_count; ++l) {
      const int n = plan.levels[l];
      detail::tagged_solve(n, b, [&] {
        const ScenarioNoise sc = coarsen_scenario(fine, plan.grid_level_for(n));
        const BackwardSolution ref = solve(problem, Scheme::reference, -1, sc, plan.solver);
        const BackwardSolution wz = solve(problem, Scheme::wong_zakai, n, sc, plan.solver);
        const auto steps = static_cast<std::size_t>(sc.grid.step_count);
        const double mesh = sc.grid.mesh();
        const auto count = static_cast<double>(sc.path_count());
        auto& y_row = y_means[l][static_cast<std::size_t>(b)];
        double z_total = 0.0;
        for (std::size_t i = 0; i <= steps; ++i) {
          double y_acc = 0.0, z_acc = 0.0;
          for (std::size_t p = 0; p < sc.path_count(); ++p) {
            const double dy = wz.y[i][p] - ref.y[i][p];
            y_acc += dy * dy;
            if (i < steps) {
              const double dz = wz.z[i][p] - ref.z[i][p];
              z_acc += dz * dz;
            }
          }
          y_row[i] = y_acc / count;
          if (i < steps) z_total += mesh * (z_acc / count);
        }
        z_sums[l][static_cast<std::size_t>(b)] = z_total;
      });
    }
  });

  ConvergenceReport report;
  report.problem = problem.name;
  report.outer_count = plan.outer_count;
  report.inner_count = plan.inner_count;
  report.seed = plan.seed;
  report.delta_slack = plan.delta_slack;
  report.rows.reserve(level_count);
  for (std::size_t l = 0; l < level_count; ++l) {
    LevelError row;
    row.level = plan.levels[l];
    row.grid_level = plan.grid_level_for(row.level);
    const std::size_t times = y_means[l][0].size();
    std::int64_t argmax = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < times; ++i) {
      double acc = 0.0;
      for (std::size_t b = 0; b < outer; ++b) acc += y_means[l][b][i];
      const double stat = acc / static_cast<double>(outer);
      if (stat > best) {
        best = stat;
        argmax = static_cast<std::int64_t>(i);
      }
    }
    row.sup_y_err2 = best;
    row.argmax_time_index = argmax;
    std::vector<double> at_argmax(outer);
    for (std::size_t b = 0; b < outer; ++b)
      at_argmax[b] = y_means[l][b][static_cast<std::size_t>(argmax)];
    row.sup_y_err2_se = detail::sample_se(at_argmax, best);
    double z_mean = 0.0;
    for (std::size_t b = 0; b < outer; ++b) z_mean += z_sums[l][b];
    z_mean /= static_cast<double>(outer);
    row.z_err_int = z_mean;
    row.z_err_int_se = detail::sample_se(z_sums[l], z_mean);
    report.rows.push_back(row);
  }
  return report;
}

// Ordinary least-squares slope of log2(composite error) against the level.
inline double fit_rate(const ConvergenceReport& report) {
  if (report.rows.size() < 3) throw ConfigError("rate fit needs at least 3 levels");
  std::string bad;
  for (const auto& row : report.rows)
    if (!(row.composite() > 0.0)) bad += (bad.empty() ? "" : ", ") + std::to_string(row.level);
  if (!bad.empty())
    throw NumericalError("rate undefined: nonpositive composite error at level(s) " + bad);
  const auto count = static_cast<double>(report.rows.size());
  double x_bar = 0.0, y_bar = 0.0;
  for (const auto& row : report.rows) {
    x_bar += static_cast<double>(row.level);
    y_bar += std::log2(row.composite());
  }
  x_bar /= count;
  y_bar /= count;
  double num = 0.0, den = 0.0;
  for (const auto& row : report.rows) {
    const double dx = static_cast<double>(row.level) - x_bar;
    num += dx * (std::log2(row.composite()) - y_bar);
    den += dx * dx;
  }
  return num / den;
}

struct IdentityRow {
  std::string name;
  double estimate = 0.0;
  double se = 0.0;
  double z = 0.0;
  bool pass = false;
  bool trivial = false;  // identically-zero samples: passes vacuously
};

struct IdentityReport {
  std::string problem;
  int level = 0;
  int grid_level = 0;
  std::int64_t outer_count = 0;
  std::int64_t inner_count = 0;
  std::uint64_t seed = 0;
  std::vector<IdentityRow> rows;
};

namespace detail {

// Statistic accumulated per (outer, inner) sample; SEs are clustered by outer
// scenario because inner paths share the outer backward path.
struct IdentityAccumulator {
  std::string name;
  std::vector<std::vector<double>> samples;  // [outer][inner]

  IdentityRow reduce() const {
    IdentityRow row;
    row.name = name;
    const auto outer = static_cast<double>(samples.size());
    bool all_zero = true;
    std::vector<double> outer_means(samples.size());
    double total = 0.0;
    for (std::size_t b = 0; b < samples.size(); ++b) {
      double acc = 0.0;
      for (double v : samples[b]) {
        acc += v;
        if (v != 0.0) all_zero = false;
      }
      outer_means[b] = acc / static_cast<double>(samples[b].size());
      total += outer_means[b];
    }
    row.estimate = total / outer;
    if (all_zero) {
      row.trivial = true;
      row.pass = true;
      return row;
    }
    row.se = sample_se(outer_means, row.estimate);
    row.z = row.se > 0.0 ? row.estimate / row.se
                         : (row.estimate == 0.0 ? 0.0
                                                : std::numeric_limits<double>::infinity());
    row.pass = std::abs(row.z) <= 3.0;
    return row;
  }
};

}  // namespace detail

// Monte Carlo check of the four zero-mean statistics behind the convergence
// argument, evaluated on the solved processes at the finest planned level,
// plus an adversarial control whose compensator is deliberately dropped and
// which is expected to fail.  All backward-path sums use level points of the
// interpolation; the forward stochastic integral uses left-endpoint sums.
inline IdentityReport identity_suite(const BdsdeProblem& problem, const ExperimentPlan& plan) {
  plan.validate();
  if (problem.horizon != plan.horizon)
    throw ConfigError("plan horizon does not match problem horizon");
  if (plan.extra_levels < 1)
    throw ConfigError(
        "identity suite needs extra_levels >= 1: its interior sample times live strictly "
        "inside interpolation intervals");
  const int n = plan.levels.back();
  const int m = plan.grid_level_for(n);
  const DyadicGrid grid = DyadicGrid::make(m, plan.horizon);
  const auto steps = static_cast<std::size_t>(grid.step_count);
  const std::size_t stride = static_cast<std::size_t>(1) << (m - n);
  const auto level_steps = static_cast<std::size_t>(DyadicGrid::make(n, plan.horizon).step_count);
  const double mesh = grid.mesh();
  const double level_mesh = std::ldexp(1.0, -n);
  const auto outer = static_cast<std::size_t>(plan.outer_count);
  const auto inner = static_cast<std::size_t>(plan.inner_count);

  const char* names[5] = {"forward_integral_mean", "backward_lookahead_mean",
                          "compensated_square_mean", "mixed_increment_mean",
                          "broken_compensator_control"};
  std::vector<detail::IdentityAccumulator> stats(5);
  for (int s = 0; s < 5; ++s) {
    stats[s].name = names[s];
    stats[s].samples.assign(outer, std::vector<double>(inner, 0.0));
  }

  parallel_for_index(plan.outer_count, plan.workers, [&](std::int64_t b) {
    detail::tagged_solve(n, b, [&] {
      const ScenarioNoise sc = make_scenario(plan.seed, b, plan.inner_count, grid);
      const BackwardSolution ref = solve(problem, Scheme::reference, -1, sc, plan.solver);
      const BackwardSolution wz = solve(problem, Scheme::wong_zakai, n, sc, plan.solver);
      const InterpolatedNoise interp(sc.b_values, grid, n);
      const auto& g = problem.diffusion.g;

      // fine index of level point j, frozen at the horizon
      auto point_index = [&](std::size_t j) { return std::min(j * stride, steps); };
      auto level_value = [&](std::size_t j) { return sc.b_values[point_index(j)]; };

      const auto bi = static_cast<std::size_t>(b);
      for (std::size_t p = 0; p < inner; ++p) {
        // left-endpoint forward integral prefix sums of z dW
        std::vector<double> prefix(steps + 1, 0.0);
        for (std::size_t i = 0; i < steps; ++i)
          prefix[i + 1] = prefix[i] + wz.z[i][p] * sc.w_increments[i][p];

        double s_forward = 0.0;
        for (std::size_t i = 0; i < steps; ++i) {
          const std::size_t k = i / stride;
          const std::size_t i_plus = std::min((k + 2) * stride, steps);
          s_forward += mesh * g(wz.y[i][p]) *
                       interp.slope_on_interval(static_cast<std::int64_t>(k)) *
                       (prefix[i_plus] - prefix[i]);
        }
        stats[0].samples[bi][p] = s_forward;

        double s_lookahead = 0.0, s_square = 0.0, s_mixed = 0.0, s_control = 0.0;
        for (std::size_t k = 0; k < level_steps; ++k) {
          const double y_plus = wz.y[point_index(k + 2)][p];
          const double db = level_value(k + 2) - level_value(k + 1);
          s_lookahead += g(y_plus) * g(y_plus) * (level_value(k + 2) - level_value(k + 3)) * db;
          if (k + 2 <= level_steps) {
            s_square += g(y_plus) * g(y_plus) * (db * db - level_mesh);
            s_control += g(y_plus) * g(y_plus) * (db * db);
            const std::size_t mid = k * stride + stride / 2;
            s_mixed += g(ref.y[point_index(k + 2)][p]) * g(y_plus) *
                       (sc.b_values[mid] - level_value(k + 1)) * db;
          }
        }
        stats[1].samples[bi][p] = s_lookahead;
        stats[2].samples[bi][p] = s_square;
        stats[3].samples[bi][p] = s_mixed;
        stats[4].samples[bi][p] = s_control;
      }
    });
  });

  IdentityReport report;
  report.problem = problem.name;
  report.level = n;
  report.grid_level = m;
  report.outer_count = plan.outer_count;
  report.inner_count = plan.inner_count;
  report.seed = plan.seed;
  for (const auto& stat : stats) report.rows.push_back(stat.reduce());
  return report;
}

struct MomentRow {
  double p = 2.0;
  int level = 0;
  int grid_level = 0;
  double value = 0.0;  // mean over outer scenarios of the pathwise moment functional
};

struct MomentSummary {
  double p = 2.0;
  double max_value = 0.0;
  double ratio = 0.0;  // max over levels / min over levels
  bool bounded = false;
};

struct MomentReport {
  std::string problem;
  std::int64_t outer_count = 0;
  std::int64_t inner_count = 0;
  std::uint64_t seed = 0;
  std::vector<MomentRow> rows;
  std::vector<MomentSummary> summaries;
};

// Uniform-in-n moment estimates of the interpolated scheme's solution; the
// boundedness flag checks that the largest-to-smallest ratio across levels
// stays at or below 2.
inline MomentReport moment_bounds(const BdsdeProblem& problem, const ExperimentPlan& plan,
                                  const std::vector<double>& p_list) {
  plan.validate();
  if (problem.horizon != plan.horizon)
    throw ConfigError("plan horizon does not match problem horizon");
  if (p_list.empty()) throw ConfigError("moment order list must not be empty");
  for (double p : p_list)
    if (p != 2.0 && p != 4.0) throw ConfigError("moment orders are restricted to {2, 4}");
  const auto level_count = plan.levels.size();
  const auto outer = static_cast<std::size_t>(plan.outer_count);
  const DyadicGrid gen_grid = DyadicGrid::make(plan.generation_level(), plan.horizon);

  // slots [level][p][outer]
  std::vector<std::vector<std::vector<double>>> values(
      level_count, std::vector<std::vector<double>>(p_list.size(), std::vector<double>(outer)));

  parallel_for_index(plan.outer_count, plan.workers, [&](std::int64_t b) {
    const ScenarioNoise fine = make_scenario(plan.seed, b, plan.inner_count, gen_grid);
    for (std::size_t l = 0; l < level_count; ++l) {
      const int n = plan.levels[l];
      detail::tagged_solve(n, b, [&] {
        const ScenarioNoise sc = coarsen_scenario(fine, plan.grid_level_for(n));
        const BackwardSolution wz = solve(problem, Scheme::wong_zakai, n, sc, plan.solver);
        for (std::size_t q = 0; q < p_list.size(); ++q)
          values[l][q][static_cast<std::size_t>(b)] = moment_functional(wz, p_list[q]);
      });
    }
  });

  MomentReport report;
  report.problem = problem.name;
  report.outer_count = plan.outer_count;
  report.inner_count = plan.inner_count;
  report.seed = plan.seed;
  for (std::size_t q = 0; q < p_list.size(); ++q) {
    MomentSummary summary;
    summary.p = p_list[q];
    double lo = 0.0, hi = 0.0;
    for (std::size_t l = 0; l < level_count; ++l) {
      MomentRow row;
      row.p = p_list[q];
      row.level = plan.levels[l];
      row.grid_level = plan.grid_level_for(row.level);
      double acc = 0.0;
      for (std::size_t b = 0; b < outer; ++b) acc += values[l][q][b];
      row.value = acc / static_cast<double>(outer);
      lo = l == 0 ? row.value : std::min(lo, row.value);
      hi = l == 0 ? row.value : std::max(hi, row.value);
      report.rows.push_back(row);
    }
    summary.max_value = hi;
    summary.ratio = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    summary.bounded = summary.ratio <= 2.0;
    report.summaries.push_back(summary);
  }
  return report;
}

}  // namespace bdsde
