#include "nrsle/circle_config.hpp"

#include <algorithm>
#include <limits>

namespace nrsle {
namespace {

constexpr double kPi = std::numbers::pi;

double reduce_mod_pi(double x) {
  double r = x - kPi * std::floor(x / kPi);
  if (r >= kPi) r -= kPi;
  if (r < 0.0) r = 0.0;
  return r;
}

void require_nondegenerate(const AngleConfig& cfg, const char* what) {
  if (cfg.size() >= 2 && cfg.min_gap() < kDegenerateGap)
    throw DegenerateConfigError(std::string(what) + ": configuration has a gap below 1e-12");
}

}  // namespace

AngleConfig AngleConfig::from_ordered(const AngleVector& angles) {
  const Eigen::Index n = angles.size();
  if (n < 1 || n > kMaxAngles) throw ValidationError("angles", "need 1 to 16 angles");
  for (Eigen::Index k = 0; k + 1 < n; ++k)
    if (!(angles(k) < angles(k + 1))) throw ValidationError("angles", "must be strictly increasing");
  if (n >= 2 && !(angles(n - 1) < angles(0) + kPi))
    throw ValidationError("angles", "span must be less than pi");
  return canonicalize(angles);
}

AngleConfig AngleConfig::canonicalize(const AngleVector& angles) {
  if (angles.size() < 1 || angles.size() > kMaxAngles) throw ValidationError("angles", "need 1 to 16 angles");
  AngleVector reduced(angles.size());
  for (Eigen::Index j = 0; j < angles.size(); ++j) reduced(j) = reduce_mod_pi(angles(j));
  std::sort(reduced.data(), reduced.data() + reduced.size());
  return AngleConfig(std::move(reduced));
}

AngleConfig AngleConfig::equally_spaced(int n, double offset) {
  AngleVector angles(n);
  for (int j = 0; j < n; ++j) angles(j) = offset + kPi * j / n;
  return canonicalize(angles);
}

AngleConfig AngleConfig::rotated(double c) const {
  return canonicalize((angles_.array() + c).matrix());
}

Eigen::VectorXcd AngleConfig::points() const {
  Eigen::VectorXcd z(angles_.size());
  for (Eigen::Index j = 0; j < angles_.size(); ++j) z(j) = std::polar(1.0, 2.0 * angles_(j));
  return z;
}

AngleVector lift_continuation(const AngleVector& previous, const AngleVector& next) {
  const Eigen::Index n = previous.size();
  AngleVector best = next;
  double best_cost = std::numeric_limits<double>::infinity();
  AngleVector candidate(n);
  for (Eigen::Index shift = 0; shift < n; ++shift) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const Eigen::Index src = (j + shift) % n;
      candidate(j) = next(src) + (j + shift >= n ? kPi : 0.0);
    }
    const double offset = kPi * std::round((previous - candidate).mean() / kPi);
    candidate.array() += offset;
    const double cost = (previous - candidate).cwiseAbs().maxCoeff();
    if (cost < best_cost) {
      best_cost = cost;
      best = candidate;
    }
  }
  return best;
}

ModelParams ModelParams::make(int n, double alpha) {
  if (n < 2) throw ValidationError("n", "must be at least 2");
  if (!(alpha > 0.0)) throw ValidationError("alpha", "must be positive");
  return ModelParams{n, alpha};
}

double product_F(const AngleConfig& cfg, double alpha) { return product_F(cfg.angles(), alpha); }

double psi(const AngleConfig& cfg) {
  require_nondegenerate(cfg, "psi");
  return psi_unchecked(cfg.angles());
}

AngleVector drift(const AngleConfig& cfg, double alpha) {
  require_nondegenerate(cfg, "drift");
  return drift_unchecked(cfg.angles(), alpha);
}

double laplacian_ratio(const AngleConfig& cfg, double alpha) {
  require_nondegenerate(cfg, "laplacian_ratio");
  return laplacian_ratio_from_psi(cfg.size(), alpha, psi_unchecked(cfg.angles()));
}

double CotIdentity::relative_discrepancy() const {
  return std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs));
}

CotIdentity check_cot_identity(const AngleConfig& cfg) {
  require_nondegenerate(cfg, "check_cot_identity");
  const AngleVector sums = drift_unchecked(cfg.angles(), 1.0);
  return {sums.squaredNorm(), psi_unchecked(cfg.angles()) - psi_minimum(cfg.size())};
}

}  // namespace nrsle
