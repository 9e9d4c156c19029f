#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "brownian.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "rng.hpp"

namespace bdsde {

// Generator f(y, z) with its declared constants: |f(y1,z1) - f(y2,z2)| is
// supposed to stay within lipschitz * (|y1-y2| + |z1-z2|), |f| within bound.
struct Driver {
  std::function<double(double, double)> f;
  double lipschitz = 0.0;
  double bound = 0.0;
};

// Noise coefficient g(y) with first derivative and declared constants.
struct Diffusion {
  std::function<double(double)> g;
  std::function<double(double)> g_prime;
  double bound = 0.0;
  double derivative_bound = 0.0;
  double derivative_lipschitz = 0.0;
};

// Drift the reference equation carries in addition to the generator, so that
// the piecewise-linear-noise scheme (which carries none) converges to it.
inline double correction(const Diffusion& d, double y) { return 0.5 * d.g(y) * d.g_prime(y); }

struct ClosedFormValue {
  double y = 0.0;
  double z = 0.0;
};

// (t, horizon, W_t, B_t, B_T) -> (Y_t, Z_t); empty when no closed form exists.
using ClosedForm = std::function<ClosedFormValue(double, double, double, double, double)>;

struct BdsdeProblem {
  std::string name;
  Driver driver;
  Diffusion diffusion;
  std::function<double(double)> terminal;  // xi as a function of W_T
  double horizon = 1.0;
  ClosedForm closed_form;
};

// ---------------------------------------------------------------------------
// built-in registry

inline BdsdeProblem make_problem(const std::string& name, double sigma = 0.5) {
  BdsdeProblem p;
  p.name = name;
  p.horizon = 1.0;
  if (name == "zero_g") {
    p.driver = {[](double y, double z) { return std::sin(y) + std::cos(z); }, 1.0, 2.0};
    p.diffusion = {[](double) { return 0.0; }, [](double) { return 0.0; }, 0.0, 0.0, 0.0};
    p.terminal = [](double w) { return std::tanh(w); };
  } else if (name == "const_g") {
    p.driver = {[](double, double) { return 0.0; }, 0.0, 0.0};
    p.diffusion = {[sigma](double) { return sigma; }, [](double) { return 0.0; },
                   std::abs(sigma), 0.0, 0.0};
    p.terminal = [](double w) { return w; };
    p.closed_form = [sigma](double, double, double w, double b_t, double b_term) {
      return ClosedFormValue{w + sigma * (b_term - b_t), 1.0};
    };
  } else if (name == "sine_g") {
    p.driver = {[](double y, double z) { return std::cos(y) + z / (1.0 + z * z); }, 1.0, 1.5};
    p.diffusion = {[](double y) { return std::sin(y); }, [](double y) { return std::cos(y); },
                   1.0, 1.0, 1.0};
    p.terminal = [](double w) { return std::tanh(w); };
  } else if (name == "tanh_g") {
    p.driver = {[](double, double) { return 0.0; }, 0.0, 0.0};
    p.diffusion = {[](double y) { return std::tanh(y); },
                   [](double y) { const double t = std::tanh(y); return 1.0 - t * t; },
                   1.0, 1.0, 0.8};
    p.terminal = [](double w) { return std::tanh(w); };
  } else {
    throw ConfigError("unknown problem '" + name +
                      "'; known problems: zero_g, const_g, sine_g, tanh_g, affine");
  }
  return p;
}

// Affine family, the only custom problems reachable from configuration:
// f(y,z) = f0 + fy*y + fz*z, g(y) = g0 + gy*y, xi(w) = x0 + xw*w.
inline BdsdeProblem make_affine_problem(double f0, double fy, double fz, double g0, double gy,
                                        double x0, double xw) {
  const double probe_radius = 10.0;
  BdsdeProblem p;
  p.name = "affine";
  p.horizon = 1.0;
  p.driver = {[f0, fy, fz](double y, double z) { return f0 + fy * y + fz * z; },
              std::abs(fy) + std::abs(fz),
              std::abs(f0) + probe_radius * (std::abs(fy) + std::abs(fz))};
  p.diffusion = {[g0, gy](double y) { return g0 + gy * y; }, [gy](double) { return gy; },
                 std::abs(g0) + probe_radius * std::abs(gy), std::abs(gy), 0.0};
  p.terminal = [x0, xw](double w) { return x0 + xw * w; };
  return p;
}

// ---------------------------------------------------------------------------
// hypothesis probing

struct HypothesisReport {
  double f_lipschitz_observed = 0.0;
  double f_bound_observed = 0.0;
  double g_bound_observed = 0.0;
  double g_derivative_observed = 0.0;
  double g_derivative_lipschitz_observed = 0.0;
  double witness_y1 = 0.0, witness_z1 = 0.0, witness_y2 = 0.0, witness_z2 = 0.0;
  bool f_lipschitz_ok = true, f_bound_ok = true;
  bool g_bound_ok = true, g_derivative_ok = true, g_derivative_lipschitz_ok = true;
  bool pass = true;
};

// Samples the coefficients on a dyadic ladder of boxes [-2^j, 2^j]^2 for j
// from a fixed floor up to floor(log2 radius), with the same unit points at
// every level.  Enlarging the radius only appends ladder levels, so probe
// sets nest and observed ratios can only grow with the radius.
inline HypothesisReport verify_hypotheses(const BdsdeProblem& problem, int probe_count,
                                          double radius, std::uint64_t seed) {
  if (probe_count < 2) throw ConfigError("probe_count must be at least 2");
  if (!(radius > 0.0) || !std::isfinite(radius)) throw ConfigError("probe radius must be positive");

  std::vector<double> uy(probe_count), uz(probe_count);
  RandomStream stream(stream_key(seed, 0x70726f62));
  for (int i = 0; i < probe_count; ++i) {
    uy[i] = 2.0 * stream.next_unit() - 1.0;
    uz[i] = 2.0 * stream.next_unit() - 1.0;
  }

  HypothesisReport r;
  const int j_max = static_cast<int>(std::floor(std::log2(radius)));
  for (int j = -40; j <= j_max; ++j) {
    const double scale = std::ldexp(1.0, j);
    for (int i = 0; i < probe_count; ++i) {
      const double y1 = scale * uy[i], z1 = scale * uz[i];
      r.f_bound_observed = std::max(r.f_bound_observed, std::abs(problem.driver.f(y1, z1)));
      r.g_bound_observed = std::max(r.g_bound_observed, std::abs(problem.diffusion.g(y1)));
      r.g_derivative_observed =
          std::max(r.g_derivative_observed, std::abs(problem.diffusion.g_prime(y1)));
      if (i + 1 == probe_count) continue;
      const double y2 = scale * uy[i + 1], z2 = scale * uz[i + 1];
      const double denom = std::abs(y1 - y2) + std::abs(z1 - z2);
      if (denom > 1e-300) {
        const double ratio = std::abs(problem.driver.f(y1, z1) - problem.driver.f(y2, z2)) / denom;
        if (ratio > r.f_lipschitz_observed) {
          r.f_lipschitz_observed = ratio;
          r.witness_y1 = y1;
          r.witness_z1 = z1;
          r.witness_y2 = y2;
          r.witness_z2 = z2;
        }
      }
      const double dy = std::abs(y1 - y2);
      if (dy > 1e-300) {
        const double dratio =
            std::abs(problem.diffusion.g_prime(y1) - problem.diffusion.g_prime(y2)) / dy;
        r.g_derivative_lipschitz_observed = std::max(r.g_derivative_lipschitz_observed, dratio);
      }
    }
  }

  const auto within = [](double observed, double declared) {
    return observed <= declared * (1.0 + 1e-9) + 1e-12;
  };
  r.f_lipschitz_ok = within(r.f_lipschitz_observed, problem.driver.lipschitz);
  r.f_bound_ok = within(r.f_bound_observed, problem.driver.bound);
  r.g_bound_ok = within(r.g_bound_observed, problem.diffusion.bound);
  r.g_derivative_ok = within(r.g_derivative_observed, problem.diffusion.derivative_bound);
  r.g_derivative_lipschitz_ok =
      within(r.g_derivative_lipschitz_observed, problem.diffusion.derivative_lipschitz);
  r.pass = r.f_lipschitz_ok && r.f_bound_ok && r.g_bound_ok && r.g_derivative_ok &&
           r.g_derivative_lipschitz_ok;
  return r;
}

// Sampled check that E[xi(W_T)^2] is finite.
inline double terminal_second_moment(const BdsdeProblem& problem, int samples = 10000,
                                     std::uint64_t seed = 1) {
  RandomStream stream(stream_key(seed, 0x7465726d));
  const double scale = std::sqrt(problem.horizon);
  double acc = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double v = problem.terminal(scale * stream.next_normal());
    acc += v * v;
  }
  const double m2 = acc / samples;
  if (!std::isfinite(m2))
    throw NumericalError("terminal condition of '" + problem.name + "' has no finite second moment");
  return m2;
}

// ---------------------------------------------------------------------------
// closed-form diagnostics

// Root-mean-square over steps of the discrete backward residual
//   Y_i - [Y_{i+1} + f(Y_{i+1},Z_{i+1}) dt + g(Y_{i+1}) dB_i
//          + correction(Y_{i+1}) dt - Z_{i+1} dW_i]
// along one path, with (Y, Z) taken from the problem's closed form.
inline double closed_form_residual(const BdsdeProblem& problem, const BrownianPair& path,
                                   int grid_level) {
  if (!problem.closed_form)
    throw ConfigError("problem '" + problem.name + "' has no closed form to check against");
  const BrownianPair coarse = coarsen(path, grid_level);
  const DyadicGrid& g = coarse.grid;
  const double dt = g.mesh();
  const double b_term = coarse.b_values.back();
  double acc = 0.0;
  for (std::int64_t i = 0; i < g.step_count; ++i) {
    const auto cur = problem.closed_form(g.time_at(i), g.horizon, coarse.w_values[i],
                                         coarse.b_values[i], b_term);
    const auto nxt = problem.closed_form(g.time_at(i + 1), g.horizon, coarse.w_values[i + 1],
                                         coarse.b_values[i + 1], b_term);
    const double residual =
        cur.y - (nxt.y + problem.driver.f(nxt.y, nxt.z) * dt +
                 problem.diffusion.g(nxt.y) * coarse.b_increments[i] +
                 correction(problem.diffusion, nxt.y) * dt - nxt.z * coarse.w_increments[i]);
    acc += residual * residual;
  }
  return std::sqrt(acc / static_cast<double>(g.step_count));
}

}  // namespace bdsde
