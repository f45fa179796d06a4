#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>

namespace nrsle {

/// A Monte-Carlo (or quadrature) estimate with its standard error and a
/// free-form parameter echo.
struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 1;
  std::map<std::string, std::string> metadata;

  /// Mean and standard error of the mean, accumulated in index order.
  static Estimate from_samples(std::span<const double> samples);

  /// |a - b| / sqrt(se_a^2 + se_b^2); +inf when both errors vanish but means differ.
  static double z_score(const Estimate& a, const Estimate& b);
};

/// Weighted least-squares line through (t, log mean).
struct DecayFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
};

struct TimedEstimate {
  double t = 0.0;
  Estimate estimate;
};

/// Fits log(mean) = intercept + slope * t with weights (mean / se)^2.
/// With any zero standard error the fit is unweighted and the slope error
/// comes from the residuals. Throws ValidationError on fewer than 3 points,
/// non-increasing t, or a non-positive mean.
DecayFit fit_decay_rate(std::span<const TimedEstimate> points);

}  // namespace nrsle
