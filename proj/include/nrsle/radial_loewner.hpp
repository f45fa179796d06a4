#pragma once

// Multi-slit radial Loewner evolution in the unit disk.
//
//   dg/dt = 2a g sum_j (z^j + g)/(z^j - g),   z^j = exp(2i theta^j)
//
// and its covering form dh/dt = a sum_j cot(h - theta^j) with g = exp(2ih).
// Maps are stored as a chain of elementary steps with frozen drivers and
// evaluated by composing adaptive RK4 flows.

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "nrsle/circle_config.hpp"
#include "nrsle/dyson_sde.hpp"
#include "nrsle/executor.hpp"

namespace nrsle {

using Complex = std::complex<double>;

enum class DriverLaw { independent, locally_independent, n_radial };

const char* to_string(DriverLaw law);
DriverLaw driver_law_from_string(const std::string& name);

struct DrivingPaths {
  std::vector<double> times;
  std::vector<AngleConfig> thetas;
  /// Continuous lift of `thetas`; chains freeze drivers from these.
  std::vector<AngleVector> lifted;
  double a = 1.0;
  DriverLaw law = DriverLaw::n_radial;
  /// Independent law only: each curve's own capacity time sigma^j(t).
  std::vector<AngleVector> sigma;
  bool terminated = false;
  std::string termination_reason;

  int n() const { return thetas.empty() ? 0 : thetas.front().size(); }
};

/// One elementary map: every slit grows at rate a for `duration` with its
/// driver frozen at `drivers` (lifted angles).
struct LoewnerStep {
  AngleVector drivers;
  double duration = 0.0;
};

class SlitMapChain {
 public:
  SlitMapChain(double a, int n);

  /// Chain of a driving path with drivers frozen at interval midpoints.
  static SlitMapChain from_driving(const DrivingPaths& driving);

  /// Appends [t, t + dt] frozen at the midpoint of the last and next drivers.
  /// `next` is a lifted angle vector; the first call after construction
  /// needs set_start().
  void append(const AngleVector& next, double dt);
  /// Appends a step frozen at `drivers` and records them as the last drivers.
  void append_frozen(const AngleVector& drivers, double dt);
  void set_start(const AngleVector& drivers) { last_ = drivers; }

  const std::vector<LoewnerStep>& steps() const { return steps_; }
  double a() const { return a_; }
  int n() const { return n_; }
  double total_time() const { return total_time_; }
  const AngleVector& last_drivers() const { return last_; }
  SlitMapChain prefix(std::size_t count) const;

 private:
  double a_;
  int n_;
  double total_time_ = 0.0;
  AngleVector last_;
  std::vector<LoewnerStep> steps_;
};

/// Copy of `chain` with one more step ending at `next_thetas`.
SlitMapChain advance_maps(const SlitMapChain& chain, const AngleConfig& next_thetas, double dt);

struct FlowOptions {
  /// Local relative error per RK4 step.
  double tol = 1e-11;
  /// Distance |z^j - g| at which a point is declared swallowed.
  double absorb_radius = 1e-10;
};

struct MapValue {
  Complex value;
  bool absorbed = false;
  /// Chain time at which absorption happened (the hitting time T_w).
  double absorbed_at = 0.0;
};

/// g_t(w) for the whole chain. Requires |w| <= 1.
MapValue evaluate_map(const SlitMapChain& chain, Complex w, const FlowOptions& options = {});

struct CapacityReport {
  double log_deriv_at_0 = 0.0;
  double expected = 0.0;
};

/// log g_t'(0) from a four-point stencil around 0, and 2 a n t.
CapacityReport capacity_report(const SlitMapChain& chain, double eps = 1e-3);

struct BoundaryDerivative {
  /// h_t(zeta): g_t(exp(2i zeta)) = exp(2i image).
  double image = 0.0;
  /// log |g_t'(w)| = -a int sum csc^2(h_s - theta_s) ds.
  double log_derivative = 0.0;
  /// min over the flow of |sin(h_s - theta^j_s)|.
  double min_distance = 0.0;
  bool absorbed = false;
};

/// Integrates h and log h' jointly along the boundary point w = exp(2i zeta).
BoundaryDerivative boundary_log_derivative(const SlitMapChain& chain, double zeta, const FlowOptions& options = {});

struct TracePoint {
  double t = 0.0;
  Complex z;
  /// |tip(tol) - tip(tol/32)|.
  double error_estimate = 0.0;
  bool accuracy_flag = false;
};

struct TraceSet {
  std::vector<std::vector<TracePoint>> curves;
};

struct TraceOptions {
  /// Trace every stride-th recorded time.
  std::size_t stride = 1;
  double tol = 1e-9;
  double flag_threshold = 1e-3;
};

/// Tips gamma^j(t) = g_t^{-1}(z^j_t) by backward flow through the chain.
TraceSet trace_curves(const DrivingPaths& driving, const TraceOptions& options = {},
                      Executor& executor = serial_executor());

/// Bessel laws delegate to the Dyson simulator with alpha = a (locally
/// independent) or 2a (n-radial). The independent law (n = 2 only)
/// co-evolves one single-slit chain per curve and the joint chain, running
/// curve j on its own clock with d sigma^j/dt = h'_{t,j}(xi^j)^{-2}.
DrivingPaths generate_driver(DriverLaw law, const AngleConfig& cfg0, double a, double t_end,
                             const SimOptions& options, std::uint64_t path_index = 0);

/// Bessel laws only, driven by caller-supplied increments.
DrivingPaths driver_from_increments(DriverLaw law, const AngleConfig& cfg0, double a, double dt,
                                    const Eigen::MatrixXd& increments, const SimOptions& options);

struct FactorMapValue {
  double value = 0.0;
  double derivative = 0.0;
  bool absorbed = false;
};

/// h_{t,j}(x) = h_t o (h^j)^{-1}(x) for a real boundary point x of the
/// domain uniformized by `own` (a one-slit chain), with `joint` the chain
/// of all slits. Value and derivative are the first two Taylor coefficients
/// from a trapezoid rule on the circle |z - x| = radius, which keeps the
/// nodes away from the slit tip where the two chains disagree most.
FactorMapValue factor_map_at(const SlitMapChain& joint, const SlitMapChain& own, double x,
                             const FlowOptions& options = {}, double radius = 0.15, int nodes = 24);

}  // namespace nrsle
