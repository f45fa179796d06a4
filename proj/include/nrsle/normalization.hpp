#pragma once

#include <cstdint>
#include <vector>

#include "nrsle/estimate.hpp"

namespace nrsle {

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;
  static GaussLegendre make(int order);
};

enum class IntegrationMethod { quadrature, monte_carlo };

struct NormalizationOptions {
  int quadrature_nodes = 200;
  std::size_t mc_samples = 1'000'000;
  int mc_strata = 1000;
  std::uint64_t seed = 0x5EEDu;
};

/// I_alpha = integral of F_alpha over the configuration space.
///
/// n = 2 uses pi * int_0^pi sin^alpha; n = 3, 4 use a tensor Gauss-Legendre
/// rule on the gap simplex (error estimated against half the node count);
/// larger n, or method == monte_carlo, uses stratified sampling of the gap
/// simplex. metadata["method"] records what actually ran.
Estimate normalization_integral(int n, double alpha, IntegrationMethod method = IntegrationMethod::quadrature,
                                const NormalizationOptions& options = {});

/// Volume of the configuration space, pi^n / (n-1)!.
double configuration_volume(int n);

}  // namespace nrsle
