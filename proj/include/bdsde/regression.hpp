#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "errors.hpp"

namespace bdsde {

// One-dimensional regression basis: raw monomials up to a degree, or hat
// functions on equally spaced knots spanning the observed feature range.
struct RegressionBasis {
  enum class Kind { polynomial, piecewise_linear };
  Kind kind = Kind::polynomial;
  int degree_or_bins = 3;
  double ridge = 1e-8;

  int dimension() const {
    return kind == Kind::polynomial ? degree_or_bins + 1 : degree_or_bins;
  }

  void validate() const {
    if (kind == Kind::polynomial) {
      if (degree_or_bins < 0 || degree_or_bins > 12)
        throw ConfigError("polynomial degree must lie in [0, 12], got " +
                          std::to_string(degree_or_bins));
    } else {
      if (degree_or_bins < 2 || degree_or_bins > 64)
        throw ConfigError("piecewise-linear bin count must lie in [2, 64], got " +
                          std::to_string(degree_or_bins));
    }
    if (!(ridge >= 0.0) || !std::isfinite(ridge))
      throw ConfigError("ridge must be nonnegative and finite");
  }
};

struct RegressionFit {
  std::vector<double> coefficients;
  std::vector<double> fitted;
};

// Ridge projection machinery for one fixed feature vector and many target
// vectors: the basis rows and the Cholesky factor of (Phi' Phi + ridge I) are
// built once, each target costs one matrix-vector pass.
class FeatureProjector {
 public:
  FeatureProjector(const std::vector<double>& features, const RegressionBasis& basis)
      : basis_(basis), count_(features.size()) {
    basis.validate();
    const std::size_t dim = static_cast<std::size_t>(basis.dimension());
    if (count_ < dim)
      throw NumericalError("regression needs at least " + std::to_string(dim) +
                           " samples for a dimension-" + std::to_string(dim) +
                           " basis, got " + std::to_string(count_));
    rows_.assign(dim, std::vector<double>(count_));
    if (basis.kind == RegressionBasis::Kind::polynomial) {
      for (std::size_t p = 0; p < count_; ++p) {
        double v = 1.0;
        for (std::size_t j = 0; j < dim; ++j) {
          rows_[j][p] = v;
          v *= features[p];
        }
      }
    } else {
      const auto [lo_it, hi_it] = std::minmax_element(features.begin(), features.end());
      const double lo = *lo_it, hi = *hi_it;
      const double knot_gap = (hi - lo) / static_cast<double>(dim - 1);
      for (std::size_t p = 0; p < count_; ++p) {
        for (std::size_t j = 0; j < dim; ++j) {
          if (knot_gap <= 0.0) {
            rows_[j][p] = j == 0 ? 1.0 : 0.0;  // collapsed feature range
            continue;
          }
          const double knot = lo + knot_gap * static_cast<double>(j);
          double hat = 1.0 - std::abs(features[p] - knot) / knot_gap;
          // end hats stay at 1 outside the knot range
          if ((j == 0 && features[p] < knot) || (j + 1 == dim && features[p] > knot)) hat = 1.0;
          rows_[j][p] = std::max(0.0, hat);
        }
      }
    }

    // normal matrix with ridge, then its Cholesky factor
    std::vector<std::vector<double>> a(dim, std::vector<double>(dim, 0.0));
    for (std::size_t j = 0; j < dim; ++j)
      for (std::size_t k = j; k < dim; ++k) {
        double s = 0.0;
        for (std::size_t p = 0; p < count_; ++p) s += rows_[j][p] * rows_[k][p];
        a[j][k] = a[k][j] = s;
      }
    double scale = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      a[j][j] += basis.ridge;
      scale = std::max(scale, a[j][j]);
    }
    const double pivot_floor = scale * 1e-13;
    chol_ = std::move(a);
    for (std::size_t j = 0; j < dim; ++j) {
      for (std::size_t k = j; k < dim; ++k) {
        double s = chol_[k][j];
        for (std::size_t l = 0; l < j; ++l) s -= chol_[j][l] * chol_[k][l];
        if (j == k) {
          if (!(s > pivot_floor) || !std::isfinite(s))
            throw NumericalError(
                "rank-deficient regression design matrix; set ridge > 0 to regularize");
          chol_[j][j] = std::sqrt(s);
        } else {
          chol_[k][j] = s / chol_[j][j];
        }
      }
    }
  }

  std::size_t sample_count() const { return count_; }
  int dimension() const { return basis_.dimension(); }

  RegressionFit project(const std::vector<double>& targets) const {
    if (targets.size() != count_)
      throw ConfigError("target count " + std::to_string(targets.size()) +
                        " does not match feature count " + std::to_string(count_));
    const std::size_t dim = rows_.size();
    RegressionFit fit;
    fit.coefficients.assign(dim, 0.0);
    for (std::size_t j = 0; j < dim; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < count_; ++p) s += rows_[j][p] * targets[p];
      fit.coefficients[j] = s;
    }
    // forward then backward substitution in place
    for (std::size_t j = 0; j < dim; ++j) {
      double s = fit.coefficients[j];
      for (std::size_t l = 0; l < j; ++l) s -= chol_[j][l] * fit.coefficients[l];
      fit.coefficients[j] = s / chol_[j][j];
    }
    for (std::size_t j = dim; j-- > 0;) {
      double s = fit.coefficients[j];
      for (std::size_t l = j + 1; l < dim; ++l) s -= chol_[l][j] * fit.coefficients[l];
      fit.coefficients[j] = s / chol_[j][j];
    }
    fit.fitted.assign(count_, 0.0);
    for (std::size_t j = 0; j < dim; ++j) {
      const double c = fit.coefficients[j];
      if (c == 0.0) continue;
      const double* row = rows_[j].data();
      double* out = fit.fitted.data();
      for (std::size_t p = 0; p < count_; ++p) out[p] += c * row[p];
    }
    return fit;
  }

 private:
  RegressionBasis basis_;
  std::size_t count_;
  std::vector<std::vector<double>> rows_;  // [basis function][sample]
  std::vector<std::vector<double>> chol_;  // lower triangle of the factor
};

// Ridge least-squares estimate of E[target | feature]: fitted values are the
// projection of the targets onto basis functions of the features.
inline RegressionFit condexp_regress(const std::vector<double>& targets,
                                     const std::vector<double>& features,
                                     const RegressionBasis& basis) {
  if (targets.size() != features.size())
    throw ConfigError("targets and features must have equal length");
  return FeatureProjector(features, basis).project(targets);
}

}  // namespace bdsde
