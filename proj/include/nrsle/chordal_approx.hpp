#pragma once

// Two-slit locally independent chordal Loewner evolution and its h-block
// discrete approximation driven by the same Brownian increments.
//
// Continuous: dX^1 = a/(X^1 - X^2) dt + dB^1, dX^2 = a/(X^2 - X^1) dt + dB^2,
//             dg/dt = a/(g - X^1) + a/(g - X^2).
// Discrete:   every block of length h grows two independent one-slit chains
//             from X^_k + (B - B_kh), maps both out, and sets X^_{k+1} to the
//             images of the two tips.
//
// With drivers frozen on the recording grid each one-slit substep is solved
// exactly by a vertical slit map, so the discrete maps are compositions of
// such maps. The second slit is mapped out after the first by zipping its
// image with vertical slits.

#include <complex>
#include <cstdint>
#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "nrsle/estimate.hpp"
#include "nrsle/executor.hpp"

namespace nrsle {

using Complex = std::complex<double>;

struct ChordalPair {
  double x1 = -1.0;
  double x2 = 1.0;
  double gap() const { return x2 - x1; }
};

struct ChordalOptions {
  /// Recording grid; every h must be a multiple of it.
  double dt = 1.0 / 4096;
  /// Runs stop once the gap falls below this.
  double gap_floor = 1e-3;
  std::uint64_t seed = 1;
  std::uint64_t stream_offset = 0;

  void validate() const;
};

/// Euler-Maruyama path of the pair on the recording grid, with its increments.
struct PairPath {
  double a = 0.5;
  double dt = 1.0 / 4096;
  std::vector<ChordalPair> points;
  /// Row i holds (dB^1, dB^2) over [i dt, (i+1) dt].
  Eigen::MatrixX2d increments;
  bool truncated = false;

  std::size_t steps() const { return points.empty() ? 0 : points.size() - 1; }
  double t_end() const { return dt * static_cast<double>(steps()); }
  /// tau_u on the grid: first index with gap <= u (steps() + 1 if never).
  std::size_t first_gap_below(double u) const;
};

PairPath simulate_pair(const ChordalPair& start, double a, double t_end, const ChordalOptions& options,
                       std::uint64_t run_index = 0);

PairPath pair_from_increments(const ChordalPair& start, double a, double dt, const Eigen::MatrixX2d& increments,
                              double gap_floor = 1e-3);

struct FlowSample {
  double t = 0.0;
  Complex g;
};

struct FlowTrajectory {
  std::vector<FlowSample> samples;
  bool absorbed = false;
  /// T_z when absorbed.
  double absorbed_at = 0.0;
  bool truncated = false;
};

/// RK4 solution of the two-pole equation along the recorded path, drivers
/// frozen at the right end of each recording step; a sample every
/// `sample_every` steps (and at t = 0).
FlowTrajectory continuous_flow(const PairPath& path, Complex z, std::size_t sample_every = 1);

/// H -> H minus the vertical segment [c, c + i sqrt(s2)], hydrodynamically normalized.
struct VerticalSlitMap {
  double c = 0.0;
  double s2 = 0.0;
  Complex operator()(Complex z) const;
  Complex inverse(Complex w) const;
};

/// The discrete scheme for one h: per block, the composed maps and the tips.
class DiscreteApproximation {
 public:
  DiscreteApproximation(const PairPath& path, double h, std::size_t max_blocks = SIZE_MAX,
                        int points_per_piece = 4);

  double h() const { return h_; }
  std::size_t blocks() const { return block_maps_.size(); }
  /// Tips X^ after each block; tips()[0] is the start.
  const std::vector<ChordalPair>& tips() const { return tips_; }
  bool truncated() const { return truncated_; }
  /// g~ after block k applied to a point already mapped by blocks < k.
  Complex apply_block(std::size_t k, Complex z) const;
  /// g~ at time kh.
  Complex evaluate(Complex z, std::size_t k) const;

 private:
  double h_;
  std::vector<std::vector<VerticalSlitMap>> block_maps_;
  std::vector<ChordalPair> tips_;
  bool truncated_ = false;
};

FlowTrajectory discrete_flow(const PairPath& path, Complex z, double h);

/// lim R (g(z) - z) z at |z| = R, from M points on the upper half circle
/// and reflection; equals hcap for hydrodynamic maps.
double far_field_coefficient(const std::function<Complex(Complex)>& g, double radius = 1e3, int nodes = 16);

struct KResult {
  double K = 0.0;
  /// Block times that entered the supremum.
  std::size_t blocks_used = 0;
  bool truncated = false;
};

/// Evaluation grid: x in {-3, -1.5, 0, 1.5, 3}, y in {1.25, 2, 3}.
std::vector<Complex> default_k_grid();

/// K(u, h) = sup |g~_t(z) - g_t(z)| over grid points with Im g_t(z) >= u,
/// block times t <= tau_u and t <= 1/u.
KResult discrepancy_K(const PairPath& path, double h, double u, const std::vector<Complex>& grid);

struct ConvergenceRow {
  double h = 0.0;
  double median_K = 0.0;
  std::size_t runs_used = 0;
};

struct ConvergenceStudy {
  std::vector<ConvergenceRow> rows;
  /// K[i][r] for h_list[i] and run r; truncated[r] per run.
  std::vector<std::vector<double>> K;
  std::vector<bool> truncated;
  /// Least-squares slope of log median K against log h, and its standard error.
  double order = 0.0;
  double order_stderr = 0.0;
  bool order_ok = false;
  bool monotone = false;
};

struct ConvergenceSetup {
  ChordalPair start{-1.0, 1.0};
  double a = 0.5;
  double u = 1.0;
  std::vector<double> h_list;
  std::size_t n_runs = 50;
  /// Zero increments: deterministic drivers.
  bool zero_noise = false;
};

ConvergenceStudy convergence_study(const ConvergenceSetup& setup, const ChordalOptions& options,
                                   Executor& executor = serial_executor());

}  // namespace nrsle
