#pragma once

// Configuration space of n ordered angles on the circumference-pi torus and
// the closed-form functionals used throughout: the sine product F_alpha, the
// cosecant-squared sum psi, the Bessel drift, and the Laplacian ratio.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "nrsle/errors.hpp"

namespace nrsle {

inline constexpr int kMaxAngles = 16;

/// Heap-free angle vector; every simulation state in this library fits in one.
using AngleVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxAngles, 1>;

/// Gaps below this are treated as collisions by psi/drift.
inline constexpr double kDegenerateGap = 1e-12;

// ---------------------------------------------------------------------------
// Scalar-generic kernels. They accept any Eigen column expression of angles,
// lifted or canonical; all of them are pi-periodic in each pairwise difference.
// ---------------------------------------------------------------------------

/// Cyclic gaps theta^{k+1} - theta^k with theta^{n+1} = theta^1 + pi.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1, 0, kMaxAngles, 1> cyclic_gaps(
    const Eigen::MatrixBase<Derived>& theta) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = theta.size();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1, 0, kMaxAngles, 1> gaps(n);
  for (Eigen::Index k = 0; k + 1 < n; ++k) gaps(k) = theta(k + 1) - theta(k);
  gaps(n - 1) = theta(0) + Scalar(std::numbers::pi) - theta(n - 1);
  return gaps;
}

template <typename Derived>
typename Derived::Scalar min_cyclic_gap(const Eigen::MatrixBase<Derived>& theta) {
  return cyclic_gaps(theta).minCoeff();
}

/// prod_{j<k} |sin(theta^k - theta^j)|^alpha.
template <typename Derived>
typename Derived::Scalar product_F(const Eigen::MatrixBase<Derived>& theta,
                                   typename Derived::Scalar alpha) {
  using std::abs;
  using std::pow;
  using std::sin;
  using Scalar = typename Derived::Scalar;
  Scalar product(1);
  for (Eigen::Index j = 0; j < theta.size(); ++j)
    for (Eigen::Index k = j + 1; k < theta.size(); ++k) product *= abs(sin(theta(k) - theta(j)));
  if (alpha == Scalar(0)) return Scalar(1);
  return pow(product, alpha);
}

/// log F_alpha; the numerically preferred form for ratios and tilts.
template <typename Derived>
typename Derived::Scalar log_product_F(const Eigen::MatrixBase<Derived>& theta,
                                       typename Derived::Scalar alpha) {
  using std::abs;
  using std::log;
  using std::sin;
  using Scalar = typename Derived::Scalar;
  Scalar sum(0);
  for (Eigen::Index j = 0; j < theta.size(); ++j)
    for (Eigen::Index k = j + 1; k < theta.size(); ++k) sum += log(abs(sin(theta(k) - theta(j))));
  return alpha * sum;
}

/// psi = sum_j sum_{k != j} csc^2(theta^j - theta^k). No degeneracy check.
template <typename Derived>
typename Derived::Scalar psi_unchecked(const Eigen::MatrixBase<Derived>& theta) {
  using std::sin;
  using Scalar = typename Derived::Scalar;
  Scalar sum(0);
  for (Eigen::Index j = 0; j < theta.size(); ++j)
    for (Eigen::Index k = j + 1; k < theta.size(); ++k) {
      const Scalar s = sin(theta(k) - theta(j));
      sum += Scalar(1) / (s * s);
    }
  return Scalar(2) * sum;
}

/// Component j: alpha * sum_{k != j} cot(theta^j - theta^k). No degeneracy check.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1, 0, kMaxAngles, 1> drift_unchecked(
    const Eigen::MatrixBase<Derived>& theta, typename Derived::Scalar alpha) {
  using std::tan;
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = theta.size();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1, 0, kMaxAngles, 1> out =
      Eigen::Matrix<Scalar, Eigen::Dynamic, 1, 0, kMaxAngles, 1>::Zero(n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index k = j + 1; k < n; ++k) {
      const Scalar c = Scalar(1) / tan(theta(j) - theta(k));
      out(j) += c;
      out(k) -= c;
    }
  return alpha * out;
}

/// Closed form of Delta F_alpha / F_alpha given psi.
template <typename Scalar>
Scalar laplacian_ratio_from_psi(int n, Scalar alpha, Scalar psi_value) {
  return -alpha * alpha * Scalar(n) * Scalar(n * n - 1) / Scalar(3) + (alpha * alpha - alpha) * psi_value;
}

/// n(n^2 - 1)/3: the minimum of psi, attained at equal spacing.
inline double psi_minimum(int n) { return n * (n * n - 1.0) / 3.0; }

// ---------------------------------------------------------------------------
// Value types
// ---------------------------------------------------------------------------

/// A point of the configuration space: n angles with
/// theta^1 < ... < theta^n < theta^1 + pi, stored as the canonical
/// representative with theta^1 in [0, pi).
class AngleConfig {
 public:
  /// Strict constructor: input must already be strictly ordered with span < pi.
  /// The representative is shifted by a multiple of pi into canonical form.
  static AngleConfig from_ordered(const AngleVector& angles);

  /// Relaxed constructor: reduces every coordinate mod pi and sorts. Coincident
  /// angles survive (min_gap() == 0) so that degenerate input can be inspected.
  static AngleConfig canonicalize(const AngleVector& angles);

  static AngleConfig equally_spaced(int n, double offset = 0.0);

  const AngleVector& angles() const { return angles_; }
  int size() const { return static_cast<int>(angles_.size()); }
  double operator[](int j) const { return angles_(j); }

  AngleVector gaps() const { return cyclic_gaps(angles_); }
  double min_gap() const { return size() < 2 ? std::numbers::pi : min_cyclic_gap(angles_); }

  /// theta -> theta + c on every coordinate, re-canonicalized.
  AngleConfig rotated(double c) const;

  /// z^j = exp(2 i theta^j), ordered counterclockwise.
  Eigen::VectorXcd points() const;

  bool operator==(const AngleConfig& other) const { return angles_ == other.angles_; }

 private:
  explicit AngleConfig(AngleVector angles) : angles_(std::move(angles)) {}
  AngleVector angles_;
};

/// Lift `next` (canonical) so it continues `previous` (lifted) with the
/// smallest total displacement. Handles the cyclic relabelling that
/// canonicalization introduces when theta^1 wraps past 0 or pi.
AngleVector lift_continuation(const AngleVector& previous, const AngleVector& next);

/// Process parameters (n, alpha) and the exponents derived from them.
struct ModelParams {
  int n = 2;
  double alpha = 1.0;

  static ModelParams make(int n, double alpha);

  /// b_alpha = (3 alpha - 1)/2.
  double b_alpha() const { return (3.0 * alpha - 1.0) / 2.0; }
  /// beta = alpha (n^2 - 1)/4.
  double beta() const { return alpha * (n * n - 1.0) / 4.0; }
  /// Exponential decay rate 2 alpha n beta of the Feynman-Kac functional.
  double decay_rate() const { return 2.0 * alpha * n * beta(); }
};

/// SLE-side exponents for kappa, with a = 2/kappa.
struct KappaExponents {
  double kappa = 2.0;
  double a() const { return 2.0 / kappa; }
  /// b = (3a - 1)/2 = (6 - kappa)/(2 kappa).
  double b() const { return (3.0 * a() - 1.0) / 2.0; }
  /// b~ = b (1 - a)/(2a) = b (kappa - 2)/4.
  double b_tilde() const { return b() * (1.0 - a()) / (2.0 * a()); }
  /// beta_hat_n = beta(a, n) - b~ (n - 1).
  double beta_hat(int n) const { return ModelParams{n, a()}.beta() - b_tilde() * (n - 1); }
};

// ---------------------------------------------------------------------------
// Checked operations on AngleConfig
// ---------------------------------------------------------------------------

double product_F(const AngleConfig& cfg, double alpha);

/// Throws DegenerateConfigError if min_gap < kDegenerateGap.
double psi(const AngleConfig& cfg);
AngleVector drift(const AngleConfig& cfg, double alpha);
double laplacian_ratio(const AngleConfig& cfg, double alpha);

struct CotIdentity {
  double lhs = 0.0;
  double rhs = 0.0;
  double relative_discrepancy() const;
};

/// Both sides of sum_j (sum_{k != j} cot)^2 = psi - n(n^2 - 1)/3.
CotIdentity check_cot_identity(const AngleConfig& cfg);

}  // namespace nrsle
