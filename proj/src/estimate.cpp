#include "nrsle/estimate.hpp"

#include <Eigen/Dense>

#include <limits>
#include <vector>

#include "nrsle/errors.hpp"

namespace nrsle {

Estimate Estimate::from_samples(std::span<const double> samples) {
  Estimate out;
  out.n_samples = samples.size();
  if (samples.empty()) throw ValidationError("samples", "need at least one sample");
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t k = 0;
  for (double x : samples) {
    ++k;
    const double delta = x - mean;
    mean += delta / static_cast<double>(k);
    m2 += delta * (x - mean);
  }
  out.mean = mean;
  if (samples.size() > 1) {
    const double variance = m2 / static_cast<double>(samples.size() - 1);
    out.std_error = std::sqrt(variance / static_cast<double>(samples.size()));
  }
  return out;
}

double Estimate::z_score(const Estimate& a, const Estimate& b) {
  const double diff = std::abs(a.mean - b.mean);
  const double se = std::hypot(a.std_error, b.std_error);
  if (se == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return diff / se;
}

DecayFit fit_decay_rate(std::span<const TimedEstimate> points) {
  if (points.size() < 3) throw ValidationError("points", "need at least 3 points");
  bool weighted = true;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i > 0 && !(points[i].t > points[i - 1].t)) throw ValidationError("points", "times must increase");
    if (!(points[i].estimate.mean > 0.0)) throw ValidationError("points", "estimate mean must be positive");
    if (!(points[i].estimate.std_error > 0.0)) weighted = false;
  }
  const auto m = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd design(m, 2);
  Eigen::VectorXd y(m);
  Eigen::VectorXd w(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& p = points[static_cast<std::size_t>(i)];
    design(i, 0) = 1.0;
    design(i, 1) = p.t;
    y(i) = std::log(p.estimate.mean);
    const double sigma = p.estimate.std_error / p.estimate.mean;
    w(i) = weighted ? 1.0 / (sigma * sigma) : 1.0;
  }
  const Eigen::MatrixXd normal = design.transpose() * w.asDiagonal() * design;
  const Eigen::Vector2d beta = normal.ldlt().solve(design.transpose() * w.asDiagonal() * y);
  const Eigen::Matrix2d cov_unscaled = normal.inverse();

  DecayFit fit;
  fit.intercept = beta(0);
  fit.slope = beta(1);
  if (weighted) {
    fit.slope_stderr = std::sqrt(cov_unscaled(1, 1));
  } else {
    const Eigen::VectorXd resid = y - design * beta;
    const double s2 = m > 2 ? resid.squaredNorm() / static_cast<double>(m - 2) : 0.0;
    fit.slope_stderr = std::sqrt(s2 * cov_unscaled(1, 1));
  }
  return fit;
}

}  // namespace nrsle
