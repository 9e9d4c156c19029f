#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "bdsde/brownian.hpp"
#include "bdsde/grid.hpp"
#include "bdsde/interpolation.hpp"
#include "bdsde/rng.hpp"

using namespace bdsde;

namespace {

// least-squares slope of y against x
double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  return sxy / sxx;
}

}  // namespace

TEST_CASE("dyadic grid construction and validation") {
  auto g = DyadicGrid::make(3, 1.0);
  CHECK(g.step_count == 8);
  CHECK(g.mesh() == 0.125);
  CHECK(g.time_at(5) == 0.625);

  auto h = DyadicGrid::make(1, 0.5);  // T = 0.5 is dyadic at level 1
  CHECK(h.step_count == 1);

  CHECK_THROWS_AS(DyadicGrid::make(0, 0.3), ConfigError);   // non-dyadic horizon
  CHECK_THROWS_AS(DyadicGrid::make(1, 0.3), ConfigError);
  CHECK_THROWS_AS(DyadicGrid::make(-1, 1.0), ConfigError);
  CHECK_THROWS_AS(DyadicGrid::make(0, -2.0), ConfigError);
  CHECK_THROWS_AS(DyadicGrid::make(0, 0.0), ConfigError);
}

TEST_CASE("grid neighbor maps") {
  // t = 0.3, level 2: interval k = 1, so two ahead = 3/4, one back = 0
  CHECK(s_plus(0.3, 2, 1.0) == 0.75);
  CHECK(s_minus(0.3, 2, 1.0) == 0.0);

  // t = 0.9, level 1: interval k = 1, two ahead = 3/2 clamps to the horizon
  CHECK(s_plus(0.9, 1, 1.0) == 1.0);
  CHECK(s_plus(0.9, 1, 1.0, false) == 1.5);
  CHECK(s_minus(0.9, 1, 1.0) == 0.0);

  CHECK(s_plus(0.8, 2, 1.0) == 1.0);
  CHECK(s_minus(0.8, 2, 1.0) == 0.5);

  // t == horizon falls into the last interval
  CHECK(interval_index(1.0, 2, 1.0) == 3);
  CHECK(s_minus(1.0, 2, 1.0) == 0.5);

  CHECK_THROWS_AS(interval_index(1.2, 2, 1.0), std::domain_error);
  CHECK_THROWS_AS(interval_index(-0.1, 2, 1.0), std::domain_error);
}

TEST_CASE("pair sampling is a pure function of seed, index and grid") {
  auto g = DyadicGrid::make(5, 1.0);
  auto a = sample_pair(7, 0, g);
  auto b = sample_pair(7, 0, g);
  REQUIRE(a.w_increments == b.w_increments);
  REQUIRE(a.b_increments == b.b_increments);
  REQUIRE(a.w_values == b.w_values);

  auto c = sample_pair(7, 1, g);
  CHECK(a.w_increments != c.w_increments);
  auto d = sample_pair(8, 0, g);
  CHECK(a.w_increments != d.w_increments);

  // W and B substreams differ within one path
  CHECK(a.w_increments != a.b_increments);
}

TEST_CASE("pair sampling has the right increment law") {
  const int level = 4;
  auto g = DyadicGrid::make(level, 1.0);
  const std::size_t n_paths = 100000;
  const double mesh = g.mesh();

  std::vector<double> var_w(g.step_count, 0.0), var_b(g.step_count, 0.0);
  double cross = 0.0, sum_ww = 0.0, sum_bb = 0.0;
  for (std::size_t p = 0; p < n_paths; ++p) {
    auto pair = sample_pair(123, static_cast<std::int64_t>(p), g);
    for (std::int64_t i = 0; i < g.step_count; ++i) {
      const double w = pair.w_increments[i], b = pair.b_increments[i];
      var_w[i] += w * w;
      var_b[i] += b * b;
      cross += w * b;
      sum_ww += w * w;
      sum_bb += b * b;
    }
  }
  for (std::int64_t i = 0; i < g.step_count; ++i) {
    CHECK(var_w[i] / n_paths >= 0.97 * mesh);
    CHECK(var_w[i] / n_paths <= 1.03 * mesh);
    CHECK(var_b[i] / n_paths >= 0.97 * mesh);
    CHECK(var_b[i] / n_paths <= 1.03 * mesh);
  }
  const double corr = cross / std::sqrt(sum_ww * sum_bb);
  CHECK(std::abs(corr) <= 3.0 / std::sqrt(static_cast<double>(n_paths)));
}

TEST_CASE("coarsening sums blocks and preserves shared cumulative values") {
  // worked example: (0.1, 0.2, -0.3, 0.4) at level 2 down to level 1
  std::vector<double> fine{0.1, 0.2, -0.3, 0.4};
  auto coarse = coarsen_increments(fine, 2, 1);
  REQUIRE(coarse.size() == 2);
  CHECK_THAT(coarse[0], Catch::Matchers::WithinAbs(0.1 + 0.2, 1e-15));
  CHECK_THAT(coarse[1], Catch::Matchers::WithinAbs(-0.3 + 0.4, 1e-15));

  // all zeros stay zeros
  std::vector<double> zeros(8, 0.0);
  auto zc = coarsen_increments(zeros, 3, 1);
  for (double v : zc) CHECK(v == 0.0);

  // refinement is rejected
  CHECK_THROWS_AS(coarsen_increments(fine, 2, 3), ConfigError);

  // same level is the identity, increments bitwise untouched
  auto g = DyadicGrid::make(6, 1.0);
  auto path = sample_pair(42, 11, g);
  auto same = coarsen(path, 6);
  CHECK(same.w_increments == path.w_increments);
  CHECK(same.b_increments == path.b_increments);

  // shared-time cumulative values match the fine path exactly, no tolerance
  auto down = coarsen(path, 3);
  REQUIRE(down.b_values.size() == 9);
  for (std::size_t j = 0; j < down.b_values.size(); ++j) {
    CHECK(down.b_values[j] == path.b_values[j * 8]);
    CHECK(down.w_values[j] == path.w_values[j * 8]);
  }
  // and coarsening in two hops gives the same values as one hop
  auto two_hop = coarsen(coarsen(path, 5), 3);
  CHECK(two_hop.b_values == down.b_values);
  CHECK(two_hop.b_increments == down.b_increments);
}

TEST_CASE("lookahead interpolation worked example") {
  // B_{1/2} = 0.3, B_1 = -0.1 on a level-1 grid, interpolation level 1
  auto g = DyadicGrid::make(1, 1.0);
  std::vector<double> values{0.0, 0.3, -0.1};
  InterpolatedNoise noise(values, g, 1);

  // on [0, 1/2): joins B_{1/2} to B_1
  CHECK_THAT(noise.value(0.25), Catch::Matchers::WithinAbs(0.1, 1e-15));
  CHECK(noise.value(0.0) == 0.3);
  CHECK_THAT(noise.slope(0.25), Catch::Matchers::WithinAbs(-0.8, 1e-15));

  // right endpoint of interval 0 equals the two-ahead grid value
  CHECK(noise.value(0.5) == -0.1);

  // last interval is flat at the frozen terminal value
  CHECK(noise.value(0.75) == -0.1);
  CHECK(noise.value(1.0) == -0.1);
  CHECK(noise.slope(0.75) == 0.0);
  CHECK(noise.slope(1.0) == 0.0);

  CHECK_THROWS_AS(noise.value(1.2), std::domain_error);
  CHECK_THROWS_AS(noise.value(-0.1), std::domain_error);
}

TEST_CASE("interpolation invariants on sampled paths") {
  auto g = DyadicGrid::make(8, 1.0);
  auto path = sample_pair(99, 5, g);
  const int n = 3;
  InterpolatedNoise noise(path.b_values, g, n);
  const double h = std::ldexp(1.0, -n);

  SECTION("piecewise affine inside each interval") {
    for (std::int64_t k = 0; k < noise.interval_count(); ++k) {
      const double a = k * h + h / 8.0, b = k * h + 7.0 * h / 8.0;
      const double mid = 0.5 * (a + b);
      const double expect = 0.5 * (noise.value(a) + noise.value(b));
      CHECK_THAT(noise.value(mid), Catch::Matchers::WithinRel(expect, 1e-12));
    }
  }

  SECTION("continuity across interval joins is exact") {
    for (std::int64_t k = 0; k + 1 < noise.interval_count(); ++k) {
      const double t = (k + 1) * h;  // join of intervals k and k+1
      CHECK(noise.value(t) == noise.level_point(k + 2));
    }
  }

  SECTION("slopes integrate back to the endpoint difference") {
    double acc = 0.0;
    for (std::int64_t k = 0; k < noise.interval_count(); ++k) acc += noise.slope_on_interval(k) * h;
    CHECK_THAT(acc, Catch::Matchers::WithinAbs(noise.value(1.0) - noise.value(0.0), 1e-12));
  }

  SECTION("slope bound by the scaled modulus of continuity") {
    for (int pi = 0; pi < 40; ++pi) {
      auto sample = sample_pair(1234, pi, g);
      InterpolatedNoise nz(sample.b_values, g, n);
      double max_slope = 0.0;
      for (std::int64_t k = 0; k < nz.interval_count(); ++k)
        max_slope = std::max(max_slope, std::abs(nz.slope_on_interval(k)));
      const double gap = max_window_gap(sample.b_values, static_cast<std::size_t>(1) << (g.level - n));
      CHECK(max_slope <= std::ldexp(gap, n) * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("interpolated value at a grid point has the lookahead variance") {
  // at t = (k+1)*2^-n the interpolant equals B_{(k+2)*2^-n}, variance (k+2)*2^-n
  const int n = 3, m = 5;
  const std::int64_t k = 2;
  auto g = DyadicGrid::make(m, 1.0);
  const double t = (k + 1) * std::ldexp(1.0, -n);
  const std::size_t n_paths = 20000;
  double acc = 0.0;
  for (std::size_t p = 0; p < n_paths; ++p) {
    auto path = sample_pair(2024, static_cast<std::int64_t>(p), g);
    InterpolatedNoise noise(path.b_values, g, n);
    const double v = noise.value(t);
    acc += v * v;
  }
  const double variance = acc / n_paths;
  const double expect = (k + 2) * std::ldexp(1.0, -n);
  const double band = 5.0 * std::sqrt(2.0 / n_paths);  // 5 relative standard errors
  CHECK(variance >= expect * (1.0 - band));
  CHECK(variance <= expect * (1.0 + band));
}

TEST_CASE("modulus statistic") {
  SECTION("degenerate inputs") {
    CHECK_THROWS_AS(modulus_stat({}, 3, 2.0), ConfigError);

    BrownianPair flat;
    flat.grid = DyadicGrid::make(4, 1.0);
    flat.w_increments.assign(16, 0.0);
    flat.b_increments.assign(16, 0.0);
    flat.w_values = cumulative_values(flat.w_increments);
    flat.b_values = cumulative_values(flat.b_increments);
    CHECK(modulus_stat({flat}, 2, 2.0) == 0.0);
  }

  SECTION("window of one interval reduces to the largest increment") {
    auto g = DyadicGrid::make(5, 1.0);
    auto path = sample_pair(7, 3, g);
    double largest = 0.0;
    for (double v : path.b_increments) largest = std::max(largest, std::abs(v));
    CHECK_THAT(modulus_stat({path}, 5, 2.0), Catch::Matchers::WithinRel(largest * largest, 1e-12));
  }

  SECTION("sliding-window maximum matches a brute-force scan over all pairs") {
    auto g = DyadicGrid::make(7, 1.0);
    for (int i = 0; i < 25; ++i) {
      const auto path = sample_pair(99, i, g);
      for (int n : {2, 3, 5, 7}) {
        const std::size_t width = std::size_t{1} << (7 - n);
        double slow = 0.0;
        for (std::size_t a = 0; a < path.b_values.size(); ++a)
          for (std::size_t b = a + 1; b < path.b_values.size() && b - a <= width; ++b)
            slow = std::max(slow, std::abs(path.b_values[b] - path.b_values[a]));
        CHECK(max_window_gap(path.b_values, width) == slow);
      }
    }
  }

  SECTION("scaling across window levels") {
    auto g = DyadicGrid::make(10, 1.0);
    std::vector<BrownianPair> paths;
    paths.reserve(2000);
    for (int p = 0; p < 2000; ++p) paths.push_back(sample_pair(31337, p, g));
    std::vector<double> xs, ys;
    for (int n = 3; n <= 8; ++n) {
      xs.push_back(n);
      ys.push_back(std::log2(modulus_stat(paths, n, 2.0)));
    }
    const double slope = ols_slope(xs, ys);
    CHECK(slope >= -1.15);
    CHECK(slope <= -0.70);
  }
}

TEST_CASE("random streams are reproducible and well distributed") {
  CHECK(stream_key(1, 2, 3) != stream_key(1, 3, 2));
  CHECK(stream_key(1, 2) != stream_key(2, 1));

  RandomStream s(stream_key(5, 0));
  RandomStream t(stream_key(5, 0));
  for (int i = 0; i < 100; ++i) REQUIRE(s.next_u64() == t.next_u64());

  RandomStream u(stream_key(17, 42));
  double mean = 0.0, var = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const double x = u.next_normal();
    mean += x;
    var += x * x;
  }
  mean /= n;
  var = var / n - mean * mean;
  CHECK(std::abs(mean) < 5e-3);
  CHECK(std::abs(var - 1.0) < 1e-2);
}
