#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "bdsde/regression.hpp"
#include "bdsde/rng.hpp"

using namespace bdsde;

namespace {

std::vector<double> draw_normals(std::size_t count, std::uint64_t key) {
  RandomStream stream(key);
  std::vector<double> out(count);
  for (auto& v : out) v = stream.next_normal();
  return out;
}

double sample_mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

TEST_CASE("constant basis with zero ridge reproduces the sample mean") {
  RegressionBasis basis;
  basis.degree_or_bins = 0;
  basis.ridge = 0.0;
  const std::vector<double> features{0.4, -1.2, 3.0, 0.1};
  const std::vector<double> targets{1.0, 2.0, 3.0, 6.0};
  const auto fit = condexp_regress(targets, features, basis);
  REQUIRE(fit.coefficients.size() == 1);
  CHECK(fit.coefficients[0] == Catch::Approx(3.0).margin(1e-12));
  for (double v : fit.fitted) CHECK(v == Catch::Approx(3.0).margin(1e-12));
}

TEST_CASE("targets inside the span are reproduced exactly at zero ridge") {
  RegressionBasis basis;
  basis.degree_or_bins = 1;
  basis.ridge = 0.0;
  const auto features = draw_normals(256, stream_key(7, 1));
  std::vector<double> targets(features.size());
  for (std::size_t p = 0; p < features.size(); ++p) targets[p] = 2.0 * features[p];
  const auto fit = condexp_regress(targets, features, basis);
  REQUIRE(fit.coefficients.size() == 2);
  CHECK(fit.coefficients[0] == Catch::Approx(0.0).margin(1e-12));
  CHECK(fit.coefficients[1] == Catch::Approx(2.0).margin(1e-12));
  for (std::size_t p = 0; p < targets.size(); ++p)
    CHECK(fit.fitted[p] == Catch::Approx(targets[p]).margin(1e-12));
}

TEST_CASE("noisy quadratic recovers its leading coefficient") {
  RegressionBasis basis;
  basis.degree_or_bins = 2;
  basis.ridge = 1e-8;
  const std::size_t count = 10000;
  const auto features = draw_normals(count, stream_key(11, 1));
  const auto noise = draw_normals(count, stream_key(11, 2));
  std::vector<double> targets(count);
  for (std::size_t p = 0; p < count; ++p)
    targets[p] = features[p] * features[p] + 0.1 * noise[p];
  const auto fit = condexp_regress(targets, features, basis);
  REQUIRE(fit.coefficients.size() == 3);
  CHECK(fit.coefficients[2] > 0.97);
  CHECK(fit.coefficients[2] < 1.03);
}

TEST_CASE("fitted values keep the target mean when constants are in the span") {
  RegressionBasis basis;
  basis.degree_or_bins = 3;
  basis.ridge = 0.0;
  const auto features = draw_normals(500, stream_key(13, 1));
  std::vector<double> targets(features.size());
  for (std::size_t p = 0; p < targets.size(); ++p)
    targets[p] = std::sin(features[p]) + 0.5;
  const auto fit = condexp_regress(targets, features, basis);
  CHECK(sample_mean(fit.fitted) == Catch::Approx(sample_mean(targets)).margin(1e-12));
}

TEST_CASE("rank-deficient design is rejected at zero ridge and solved with ridge") {
  RegressionBasis basis;
  basis.degree_or_bins = 1;
  basis.ridge = 0.0;
  const std::vector<double> features(8, 1.5);  // constant column twice over
  const std::vector<double> targets{1, 2, 3, 4, 5, 6, 7, 8};
  CHECK_THROWS_MATCHES(condexp_regress(targets, features, basis), NumericalError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("ridge > 0")));
  basis.ridge = 1e-8;
  CHECK_NOTHROW(condexp_regress(targets, features, basis));
}

TEST_CASE("sample count below the basis dimension is rejected") {
  RegressionBasis basis;
  basis.degree_or_bins = 3;  // dimension 4
  const std::vector<double> features{0.1, 0.2, 0.3};
  const std::vector<double> targets{1.0, 2.0, 3.0};
  CHECK_THROWS_AS(condexp_regress(targets, features, basis), NumericalError);

  // exactly dimension-many samples interpolate
  const std::vector<double> f4{0.1, 0.2, 0.3, 0.4};
  const std::vector<double> t4{1.0, -1.0, 2.0, 0.5};
  RegressionBasis exact = basis;
  exact.ridge = 0.0;
  const auto fit = condexp_regress(t4, f4, exact);
  for (std::size_t p = 0; p < t4.size(); ++p)
    CHECK(fit.fitted[p] == Catch::Approx(t4[p]).margin(1e-8));
}

TEST_CASE("huge ridge shrinks coefficients toward zero") {
  RegressionBasis basis;
  basis.degree_or_bins = 2;
  basis.ridge = 1e12;
  const auto features = draw_normals(200, stream_key(17, 1));
  std::vector<double> targets(features.size());
  for (std::size_t p = 0; p < targets.size(); ++p) targets[p] = 3.0 + features[p];
  const auto fit = condexp_regress(targets, features, basis);
  for (double c : fit.coefficients) CHECK(std::abs(c) < 1e-6);
}

TEST_CASE("piecewise-linear basis is a partition of unity and fits a kink") {
  RegressionBasis basis;
  basis.kind = RegressionBasis::Kind::piecewise_linear;
  basis.degree_or_bins = 9;
  basis.ridge = 1e-10;
  const auto features = draw_normals(4000, stream_key(19, 1));
  std::vector<double> targets(features.size());
  for (std::size_t p = 0; p < targets.size(); ++p) targets[p] = std::abs(features[p]);
  const auto fit = condexp_regress(targets, features, basis);
  double max_err = 0.0;
  for (std::size_t p = 0; p < targets.size(); ++p)
    max_err = std::max(max_err, std::abs(fit.fitted[p] - targets[p]));
  // hat functions reproduce |x| up to the knot spacing scale
  CHECK(max_err < 0.5);

  // constants lie in the span: coefficients all equal to the constant fit it exactly
  std::vector<double> ones(features.size(), 4.0);
  RegressionBasis flat = basis;
  flat.ridge = 0.0;
  const auto cfit = condexp_regress(ones, features, flat);
  for (std::size_t p = 0; p < ones.size(); ++p)
    CHECK(cfit.fitted[p] == Catch::Approx(4.0).margin(1e-9));
}

TEST_CASE("projector reuses one factorization across many targets") {
  RegressionBasis basis;
  basis.degree_or_bins = 3;
  basis.ridge = 1e-8;
  const auto features = draw_normals(512, stream_key(23, 1));
  FeatureProjector projector(features, basis);
  CHECK(projector.dimension() == 4);
  CHECK(projector.sample_count() == 512);
  std::vector<double> t1(features.size()), t2(features.size());
  for (std::size_t p = 0; p < features.size(); ++p) {
    t1[p] = std::cos(features[p]);
    t2[p] = features[p] * 0.25 - 1.0;
  }
  const auto f1 = projector.project(t1);
  const auto f2 = projector.project(t2);
  const auto g1 = condexp_regress(t1, features, basis);
  const auto g2 = condexp_regress(t2, features, basis);
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK(f1.coefficients[j] == g1.coefficients[j]);
    CHECK(f2.coefficients[j] == g2.coefficients[j]);
  }
  std::vector<double> wrong(features.size() + 1, 0.0);
  CHECK_THROWS_AS(projector.project(wrong), ConfigError);
}

TEST_CASE("basis parameter validation") {
  RegressionBasis basis;
  basis.degree_or_bins = -1;
  CHECK_THROWS_AS(basis.validate(), ConfigError);
  basis.degree_or_bins = 13;
  CHECK_THROWS_AS(basis.validate(), ConfigError);
  basis.kind = RegressionBasis::Kind::piecewise_linear;
  basis.degree_or_bins = 1;
  CHECK_THROWS_AS(basis.validate(), ConfigError);
  basis.degree_or_bins = 8;
  basis.ridge = -1.0;
  CHECK_THROWS_AS(basis.validate(), ConfigError);
  basis.ridge = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(basis.validate(), ConfigError);
}
