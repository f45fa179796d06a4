#pragma once

// n-radial Bessel process (Dyson Brownian motion on the circle)
//
//   d theta^j = alpha sum_{k != j} cot(theta^j - theta^k) dt + dW^j
//
// integrated by Euler-Maruyama or stochastic Heun with recursive Brownian-bridge substepping
// near collisions, plus the Monte-Carlo checks built on it: the P_alpha ->
// P_{2 alpha} martingale, the Feynman-Kac functional and its tilted
// estimator, stationarity, and reversibility.

#include <cstdint>
#include <vector>

#include "nrsle/circle_config.hpp"
#include "nrsle/estimate.hpp"
#include "nrsle/executor.hpp"
#include "nrsle/rng.hpp"

namespace nrsle {

/// Euler-Maruyama, or the stochastic Heun predictor-corrector (weak order 2
/// for additive noise; its O(dt) bias is what separates the two).
enum class Scheme { euler, heun };

struct SimOptions {
  double dt = 1e-3;
  Scheme scheme = Scheme::heun;
  /// A step that moves a gap by more than a quarter of min(old gap, new gap)
  /// while that minimum is below this floor is bisected along a Brownian bridge.
  double gap_floor = 0.1;
  int max_substep_depth = 20;
  std::uint64_t seed = 1;
  std::size_t n_paths = 1000;
  /// Added to every path index before it keys a random stream, so that
  /// several experiments can share one seed without sharing draws.
  std::uint64_t stream_offset = 0;

  void validate() const;
};

struct StepDiagnostics {
  std::uint64_t steps = 0;
  std::uint64_t substeps = 0;
  /// Bisection exhausted and the proposal still left the configuration space.
  std::uint64_t rejections = 0;

  StepDiagnostics& operator+=(const StepDiagnostics& other) {
    steps += other.steps;
    substeps += other.substeps;
    rejections += other.rejections;
    return *this;
  }
};

/// Lifted (unwrapped) state of one path together with psi at that state.
struct DysonState {
  AngleVector theta;
  double psi = 0.0;
};

/// Stateless integrator for one value of alpha.
class DysonStepper {
 public:
  DysonStepper(double alpha, const SimOptions& options);

  DysonState make_state(const AngleVector& theta) const;

  /// Advances `state` over `dt` using the Brownian increment `increment`
  /// (variance dt per coordinate). Bridge draws for bisection come from
  /// `bridge`. Returns the trapezoid integral of psi over the step, taken on
  /// the substep grid.
  double advance(DysonState& state, double dt, const AngleVector& increment, RandomStream& bridge,
                 StepDiagnostics& diagnostics) const;

  double alpha() const { return alpha_; }

 private:
  double advance_recursive(DysonState& state, double dt, const AngleVector& increment, int depth,
                           RandomStream& bridge, StepDiagnostics& diagnostics) const;
  bool acceptable(const AngleVector& from, const AngleVector& to) const;

  double alpha_;
  Scheme scheme_;
  double gap_floor_;
  int max_depth_;
};

/// One step of options.scheme from a canonical configuration.
AngleConfig step_dyson(const AngleConfig& cfg, double alpha, double dt, const AngleVector& noise,
                       const SimOptions& options, RandomStream& bridge, StepDiagnostics* diagnostics = nullptr);

struct SdePath {
  std::vector<double> times;
  std::vector<AngleConfig> configs;
  /// Continuous lift of `configs`, for consumers that need to interpolate.
  std::vector<AngleVector> lifted;
  /// Running integral of psi; psi_integral[k] covers [0, times[k]].
  std::vector<double> psi_integral;
  double alpha = 0.0;
  StepDiagnostics diagnostics;
};

/// Simulates one path of length ceil(t_end/dt) + 1 on stream `path_index`.
SdePath simulate(const AngleConfig& cfg0, double alpha, double t_end, const SimOptions& options,
                 std::uint64_t path_index = 0);

/// Same, driven by caller-supplied increments (one row per step, each row
/// with variance dt per coordinate). Bisection bridges still draw from the
/// stream selected by options.seed and path_index.
SdePath simulate_with_increments(const AngleConfig& cfg0, double alpha, double dt, const Eigen::MatrixXd& increments,
                                 const SimOptions& options, std::uint64_t path_index = 0);

/// E_alpha[N_t] / N_0 for N_t = F_alpha(theta_t) e^{alpha^2 n (n^2-1) t / 2} e^{-alpha b_alpha int psi}.
Estimate check_martingale_N(const AngleConfig& cfg0, double alpha, double t, const SimOptions& options,
                            Executor& executor = serial_executor());

enum class FeynmanKacMethod { direct, tilted };

/// E_alpha[exp(-alpha b_alpha int_0^t psi)], either averaged directly under
/// P_alpha or through e^{-alpha^2 n(n^2-1)t/2} F_alpha(theta_0) F_{-alpha}(theta_t)
/// under P_{2 alpha}.
Estimate estimate_feynman_kac(const AngleConfig& cfg0, double alpha, double t, const SimOptions& options,
                              FeynmanKacMethod method, Executor& executor = serial_executor());

/// Feynman-Kac estimates at several times, each on its own block of streams.
std::vector<TimedEstimate> feynman_kac_curve(const AngleConfig& cfg0, double alpha, const std::vector<double>& times,
                                             const SimOptions& options, FeynmanKacMethod method,
                                             Executor& executor = serial_executor());

/// opts.n_paths independent chains, each burnt in for `burn_in` and then
/// sampled every `thin` time units; returns exactly n_samples configurations.
std::vector<AngleConfig> sample_invariant(int n, double alpha, double burn_in, std::size_t n_samples,
                                          const SimOptions& options, Executor& executor = serial_executor(),
                                          double thin = 0.25);

/// Stationary gap law for n = 2: density proportional to sin^{2 alpha} on (0, pi).
class StationaryGapLaw {
 public:
  explicit StationaryGapLaw(double alpha, int table_size = 20001);
  double cdf(double x) const;
  double quantile(double u) const;
  /// Probability mass of [lo, hi].
  double mass(double lo, double hi) const { return cdf(hi) - cdf(lo); }

 private:
  std::vector<double> grid_;
  std::vector<double> cdf_;
};

struct DetailedBalanceReport {
  /// max |P(i->j) w(i) - P(j->i) w(j)| / (3 sigma) over tested pairs.
  double max_ratio_error = 0.0;
  std::size_t pairs_tested = 0;
  /// Pairs with at least one transition but fewer than min_count either way.
  std::size_t pairs_excluded = 0;
  std::size_t pairs_failed = 0;
  /// max over well-populated rows of the total-variation distance between
  /// P(i -> .) and the stationary bin weights.
  double max_row_tv_to_stationary = 0.0;
  std::vector<double> bin_weights;
  std::vector<std::vector<std::uint64_t>> counts;
};

/// Binned reversibility test for the n = 2 gap coordinate. Starts are drawn
/// from the stationary gap law, run for time t, and binned into n_bins
/// equal-width bins on (0, pi). Pairs need min_count transitions each way.
DetailedBalanceReport check_detailed_balance_n2(double alpha, double t, int n_bins, const SimOptions& options,
                                                Executor& executor = serial_executor(),
                                                std::uint64_t min_count = 100);

}  // namespace nrsle
