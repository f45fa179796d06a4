#include "nrsle/normalization.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nrsle/circle_config.hpp"
#include "nrsle/errors.hpp"
#include "nrsle/rng.hpp"

namespace nrsle {
namespace {

constexpr double kPi = std::numbers::pi;

// Sine product at positions (0, p_1, ..., p_{n-1}).
double product_at(const double* positions, int n, double alpha) {
  double product = 1.0;
  for (int j = 0; j < n; ++j)
    for (int k = j + 1; k < n; ++k) product *= std::abs(std::sin(positions[k] - positions[j]));
  return alpha == 0.0 ? 1.0 : std::pow(product, alpha);
}

// Tensor Gauss-Legendre on the (n-1)-gap simplex through the collapsed
// (Duffy) coordinates x_i = R_{i-1} s_i, R_i = R_{i-1} (1 - s_i), R_0 = pi.
double simplex_quadrature(int n, double alpha, int order) {
  const GaussLegendre rule = GaussLegendre::make(order);
  std::vector<double> s(rule.nodes.size()), ws(rule.nodes.size());
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    s[i] = 0.5 * (rule.nodes[i] + 1.0);
    ws[i] = 0.5 * rule.weights[i];
  }
  const int dims = n - 1;
  double positions[kMaxAngles] = {0.0};
  double total = 0.0;

  auto recurse = [&](auto&& self, int level, double remaining, double jacobian, double weight) -> void {
    if (level == dims) {
      total += weight * jacobian * product_at(positions, n, alpha);
      return;
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double x = remaining * s[i];
      positions[level + 1] = positions[level] + x;
      self(self, level + 1, remaining * (1.0 - s[i]), jacobian * remaining, weight * ws[i]);
    }
  };
  recurse(recurse, 0, kPi, 1.0, 1.0);
  return kPi * total;
}

Estimate stratified_monte_carlo(int n, double alpha, const NormalizationOptions& options) {
  const int strata = std::max(1, options.mc_strata);
  const std::size_t per_stratum = std::max<std::size_t>(2, options.mc_samples / static_cast<std::size_t>(strata));
  const double scale = configuration_volume(n);  // pi times the gap-simplex volume
  double mean = 0.0;
  double variance_of_mean = 0.0;
  std::vector<double> u(static_cast<std::size_t>(n - 1));
  double positions[kMaxAngles] = {0.0};
  for (int stratum = 0; stratum < strata; ++stratum) {
    RandomStream rng(options.seed, static_cast<std::uint64_t>(stratum));
    double m = 0.0, m2 = 0.0;
    for (std::size_t k = 0; k < per_stratum; ++k) {
      u[0] = (stratum + rng.uniform()) / strata;
      for (std::size_t i = 1; i < u.size(); ++i) u[i] = rng.uniform();
      std::vector<double> sorted = u;
      std::sort(sorted.begin(), sorted.end());
      for (int i = 0; i < n - 1; ++i) positions[i + 1] = kPi * sorted[static_cast<std::size_t>(i)];
      const double value = scale * product_at(positions, n, alpha);
      const double delta = value - m;
      m += delta / static_cast<double>(k + 1);
      m2 += delta * (value - m);
    }
    const double var = m2 / static_cast<double>(per_stratum - 1);
    mean += m / strata;
    variance_of_mean += var / static_cast<double>(per_stratum) / (static_cast<double>(strata) * strata);
  }
  Estimate out;
  out.mean = mean;
  out.std_error = std::sqrt(variance_of_mean);
  out.n_samples = per_stratum * static_cast<std::size_t>(strata);
  out.metadata["method"] = "stratified-monte-carlo";
  out.metadata["strata"] = std::to_string(strata);
  return out;
}

}  // namespace

GaussLegendre GaussLegendre::make(int order) {
  if (order < 1) throw ValidationError("order", "must be positive");
  GaussLegendre rule;
  rule.nodes.resize(static_cast<std::size_t>(order));
  rule.weights.resize(static_cast<std::size_t>(order));
  for (int i = 0; i < (order + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (order + 0.5));
    double derivative = 1.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= order; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      derivative = order * (x * p1 - p0) / (x * x - 1.0);
      const double step = p1 / derivative;
      x -= step;
      if (std::abs(step) < 1e-16) break;
    }
    const auto lo = static_cast<std::size_t>(i);
    const auto hi = static_cast<std::size_t>(order - 1 - i);
    const double w = 2.0 / ((1.0 - x * x) * derivative * derivative);
    rule.nodes[lo] = -x;
    rule.nodes[hi] = x;
    rule.weights[lo] = w;
    rule.weights[hi] = w;
  }
  return rule;
}

double configuration_volume(int n) { return std::pow(kPi, n) / std::tgamma(static_cast<double>(n)); }

Estimate normalization_integral(int n, double alpha, IntegrationMethod method, const NormalizationOptions& options) {
  if (n < 2 || n > kMaxAngles) throw ValidationError("n", "must be between 2 and 16");
  if (!(alpha >= 0.0)) throw ValidationError("alpha", "must be non-negative");

  Estimate out;
  out.metadata["n"] = std::to_string(n);
  out.metadata["alpha"] = std::to_string(alpha);

  if (method == IntegrationMethod::quadrature && n == 2) {
    // pi * int_0^pi sin^alpha x dx = pi * sqrt(pi) Gamma((alpha+1)/2) / Gamma(alpha/2 + 1)
    out.mean = kPi * std::sqrt(kPi) * std::exp(std::lgamma(0.5 * (alpha + 1.0)) - std::lgamma(0.5 * alpha + 1.0));
    out.std_error = 0.0;
    out.metadata["method"] = "exact-reduction";
    return out;
  }
  if (method == IntegrationMethod::quadrature && n <= 4) {
    const int order = options.quadrature_nodes;
    out.mean = simplex_quadrature(n, alpha, order);
    out.std_error = std::abs(out.mean - simplex_quadrature(n, alpha, std::max(2, order / 2)));
    out.n_samples = static_cast<std::size_t>(std::pow(order, n - 1));
    out.metadata["method"] = "gauss-legendre";
    out.metadata["nodes_per_axis"] = std::to_string(order);
    return out;
  }
  Estimate mc = stratified_monte_carlo(n, alpha, options);
  mc.metadata.insert(out.metadata.begin(), out.metadata.end());
  if (method == IntegrationMethod::quadrature) mc.metadata["fallback"] = "quadrature unsupported for n > 4";
  return mc;
}

}  // namespace nrsle
