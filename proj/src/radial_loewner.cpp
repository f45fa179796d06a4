#include "nrsle/radial_loewner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include "nrsle/errors.hpp"
#include "nrsle/rng.hpp"
#include "rk4_flow.hpp"

namespace nrsle {
namespace {

using detail::rk4_flow;

constexpr double kPi = std::numbers::pi;
constexpr Complex kI(0.0, 1.0);

// Flow of a covering-coordinate point h through steps [first, last) of a
// chain, forwards or backwards. `skip` shortens the first step processed
// (backwards: the last step of the range) by that much time.
bool flow_zeta(const SlitMapChain& chain, Complex& h, bool forward, double tol, double absorb_radius,
               std::size_t count, double skip = 0.0) {
  const double a = chain.a();
  double hint = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t idx = forward ? i : count - 1 - i;
    const LoewnerStep& step = chain.steps()[idx];
    const AngleVector& theta = step.drivers;
    auto field = [&](const Complex& u) {
      Complex sum = 0.0;
      for (Eigen::Index j = 0; j < theta.size(); ++j) sum += 1.0 / std::tan(u - theta(j));
      return a * sum;
    };
    auto cap = [&](const Complex& u) {
      double d = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < theta.size(); ++j) d = std::min(d, std::abs(std::sin(u - theta(j))));
      return d < absorb_radius ? -1.0 : 0.1 * d * d / a;
    };
    const double duration = step.duration - (i == 0 ? skip : 0.0);
    if (duration <= 0.0) continue;
    if (!rk4_flow(h, duration, forward ? 1.0 : -1.0, field, cap, tol, 1.0, hint)) return false;
  }
  return true;
}

void require_positive_a(double a) {
  if (!(a > 0.0)) throw ValidationError("a", "must be positive");
}

DrivingPaths from_sde_path(const SdePath& path, double a, DriverLaw law) {
  DrivingPaths out;
  out.times = path.times;
  out.thetas = path.configs;
  out.lifted = path.lifted;
  out.a = a;
  out.law = law;
  return out;
}

double bessel_alpha(DriverLaw law, double a) {
  switch (law) {
    case DriverLaw::locally_independent:
      return a;
    case DriverLaw::n_radial:
      return 2.0 * a;
    case DriverLaw::independent:
      break;
  }
  throw ValidationError("law", "independent law is not a Bessel law");
}

DrivingPaths independent_driver(const AngleConfig& cfg0, double a, double t_end, const SimOptions& options,
                                std::uint64_t path_index) {
  if (cfg0.size() != 2) throw ValidationError("n", "independent law is implemented for n = 2 only");
  RandomStream rng(options.seed, options.stream_offset + path_index);
  const auto steps = t_end > 0.0 ? static_cast<std::uint64_t>(std::ceil(t_end / options.dt - 1e-9)) : 0;

  DrivingPaths out;
  out.a = a;
  out.law = DriverLaw::independent;
  AngleVector theta = cfg0.angles();
  AngleVector xi = theta;
  AngleVector sigma = AngleVector::Zero(2);
  AngleVector sigma_dot = AngleVector::Ones(2);
  std::vector<SlitMapChain> own{SlitMapChain(a, 1), SlitMapChain(a, 1)};
  SlitMapChain joint(a, 2);
  joint.set_start(theta);
  for (int j = 0; j < 2; ++j) own[static_cast<std::size_t>(j)].set_start(AngleVector::Constant(1, xi(j)));

  auto record = [&](double t) {
    out.times.push_back(t);
    out.thetas.push_back(AngleConfig::canonicalize(theta));
    out.lifted.push_back(theta);
    out.sigma.push_back(sigma);
  };
  record(0.0);
  double t = 0.0;
  for (std::uint64_t k = 1; k <= steps; ++k) {
    const double h = k == steps ? t_end - static_cast<double>(steps - 1) * options.dt : options.dt;
    AngleVector d_sigma(2), next_xi(2), next_theta(2), next_sigma_dot(2);
    for (int j = 0; j < 2; ++j) {
      d_sigma(j) = sigma_dot(j) * h;
      next_xi(j) = xi(j) + std::sqrt(d_sigma(j)) * rng.normal();
    }
    for (int j = 0; j < 2; ++j) {
      const FactorMapValue fm = factor_map_at(joint, own[static_cast<std::size_t>(j)], next_xi(j));
      if (fm.absorbed || !(fm.derivative > 0.0)) {
        out.terminated = true;
        out.termination_reason = "curves collided (factor map evaluation absorbed)";
        return out;
      }
      next_theta(j) = fm.value;
      next_sigma_dot(j) = 1.0 / (fm.derivative * fm.derivative);
    }
    const double gap = next_theta(1) - next_theta(0);
    if (!(gap > 1e-6 && gap < kPi - 1e-6)) {
      out.terminated = true;
      out.termination_reason = "curves collided (driving angles met)";
      return out;
    }
    for (int j = 0; j < 2; ++j)
      own[static_cast<std::size_t>(j)].append_frozen(AngleVector::Constant(1, next_xi(j)), d_sigma(j));
    joint.append_frozen(next_theta, h);
    xi = next_xi;
    theta = next_theta;
    sigma += d_sigma;
    sigma_dot = next_sigma_dot;
    t += h;
    record(t);
  }
  return out;
}

}  // namespace

const char* to_string(DriverLaw law) {
  switch (law) {
    case DriverLaw::independent:
      return "independent";
    case DriverLaw::locally_independent:
      return "locally-independent";
    case DriverLaw::n_radial:
      return "n-radial";
  }
  return "unknown";
}

DriverLaw driver_law_from_string(const std::string& name) {
  if (name == "independent") return DriverLaw::independent;
  if (name == "locally-independent") return DriverLaw::locally_independent;
  if (name == "n-radial") return DriverLaw::n_radial;
  throw ValidationError("law", "expected independent, locally-independent or n-radial, got '" + name + "'");
}

SlitMapChain::SlitMapChain(double a, int n) : a_(a), n_(n), last_(AngleVector::Zero(n)) {
  require_positive_a(a);
  if (n < 1 || n > kMaxAngles) throw ValidationError("n", "must be between 1 and 16");
}

SlitMapChain SlitMapChain::from_driving(const DrivingPaths& driving) {
  if (driving.lifted.empty()) throw ValidationError("driving", "empty driving path");
  SlitMapChain chain(driving.a, driving.n());
  chain.set_start(driving.lifted.front());
  for (std::size_t k = 1; k < driving.lifted.size(); ++k)
    chain.append(driving.lifted[k], driving.times[k] - driving.times[k - 1]);
  return chain;
}

void SlitMapChain::append(const AngleVector& next, double dt) {
  if (next.size() != n_) throw ValidationError("next", "driver count does not match the chain");
  if (dt < 0.0) throw ValidationError("dt", "must be non-negative");
  if (dt > 0.0) {
    steps_.push_back({0.5 * (last_ + next), dt});
    total_time_ += dt;
  }
  last_ = next;
}

void SlitMapChain::append_frozen(const AngleVector& drivers, double dt) {
  if (drivers.size() != n_) throw ValidationError("drivers", "driver count does not match the chain");
  if (dt < 0.0) throw ValidationError("dt", "must be non-negative");
  if (dt > 0.0) {
    steps_.push_back({drivers, dt});
    total_time_ += dt;
  }
  last_ = drivers;
}

SlitMapChain SlitMapChain::prefix(std::size_t count) const {
  SlitMapChain out(a_, n_);
  count = std::min(count, steps_.size());
  out.steps_.assign(steps_.begin(), steps_.begin() + static_cast<std::ptrdiff_t>(count));
  for (const auto& s : out.steps_) out.total_time_ += s.duration;
  out.last_ = count > 0 ? out.steps_.back().drivers : last_;
  return out;
}

SlitMapChain advance_maps(const SlitMapChain& chain, const AngleConfig& next_thetas, double dt) {
  if (!(dt >= 0.0)) throw ValidationError("dt", "must be non-negative");
  SlitMapChain out = chain;
  out.append(lift_continuation(chain.last_drivers(), next_thetas.angles()), dt);
  return out;
}

MapValue evaluate_map(const SlitMapChain& chain, Complex w, const FlowOptions& options) {
  if (std::abs(w) > 1.0 + 1e-12) throw ValidationError("w", "must lie in the closed unit disk");
  MapValue out{w, false, 0.0};
  if (w == Complex(0.0)) return out;
  const double a = chain.a();
  double hint = 0.0;
  double t = 0.0;
  Eigen::VectorXcd z(chain.n());
  for (const LoewnerStep& step : chain.steps()) {
    for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = std::polar(1.0, 2.0 * step.drivers(j));
    auto field = [&](const Complex& g) {
      Complex sum = 0.0;
      for (Eigen::Index j = 0; j < z.size(); ++j) sum += (z(j) + g) / (z(j) - g);
      return 2.0 * a * g * sum;
    };
    auto cap = [&](const Complex& g) {
      double d = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < z.size(); ++j) d = std::min(d, std::abs(z(j) - g));
      return d < options.absorb_radius ? -1.0 : 0.1 * d * d / a;
    };
    if (!rk4_flow(out.value, step.duration, 1.0, field, cap, options.tol, 1e-300, hint)) {
      out.absorbed = true;
      out.absorbed_at = t;
      return out;
    }
    t += step.duration;
  }
  return out;
}

CapacityReport capacity_report(const SlitMapChain& chain, double eps) {
  CapacityReport out;
  out.expected = 2.0 * chain.a() * chain.n() * chain.total_time();
  if (chain.steps().empty()) return out;
  auto g = [&](Complex w) { return evaluate_map(chain, w).value; };
  const Complex d = (g(eps) - g(-eps) - kI * g(kI * eps) + kI * g(-kI * eps)) / (4.0 * eps);
  out.log_deriv_at_0 = std::log(std::abs(d));
  return out;
}

BoundaryDerivative boundary_log_derivative(const SlitMapChain& chain, double zeta, const FlowOptions& options) {
  const double a = chain.a();
  BoundaryDerivative out;
  out.min_distance = std::numeric_limits<double>::infinity();
  Eigen::Vector2d y(zeta, 0.0);
  double hint = 0.0;
  for (const LoewnerStep& step : chain.steps()) {
    const AngleVector& theta = step.drivers;
    auto field = [&](const Eigen::Vector2d& u) {
      Eigen::Vector2d dy = Eigen::Vector2d::Zero();
      for (Eigen::Index j = 0; j < theta.size(); ++j) {
        const double s = std::sin(u(0) - theta(j));
        dy(0) += std::cos(u(0) - theta(j)) / s;
        dy(1) -= 1.0 / (s * s);
      }
      return Eigen::Vector2d(a * dy);
    };
    auto cap = [&](const Eigen::Vector2d& u) {
      double d = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < theta.size(); ++j) d = std::min(d, std::abs(std::sin(u(0) - theta(j))));
      out.min_distance = std::min(out.min_distance, d);
      return d < options.absorb_radius ? -1.0 : 0.1 * d * d / a;
    };
    if (!rk4_flow(y, step.duration, 1.0, field, cap, options.tol, 1.0, hint)) {
      out.absorbed = true;
      break;
    }
  }
  out.image = y(0);
  out.log_derivative = y(1);
  return out;
}

TraceSet trace_curves(const DrivingPaths& driving, const TraceOptions& options, Executor& executor) {
  if (driving.lifted.empty()) throw ValidationError("driving", "empty driving path");
  if (options.stride < 1) throw ValidationError("stride", "must be at least 1");
  const SlitMapChain chain = SlitMapChain::from_driving(driving);
  const int n = driving.n();
  const double a = driving.a;

  std::vector<std::size_t> indices;
  for (std::size_t k = 0; k < driving.times.size(); k += options.stride) indices.push_back(k);
  if (indices.back() != driving.times.size() - 1) indices.push_back(driving.times.size() - 1);

  // Steps of zero duration are dropped by the chain, so map record index to step count.
  std::vector<std::size_t> steps_before(driving.times.size(), 0);
  for (std::size_t k = 1; k < driving.times.size(); ++k)
    steps_before[k] = steps_before[k - 1] + (driving.times[k] > driving.times[k - 1] ? 1 : 0);

  TraceSet out;
  out.curves.assign(static_cast<std::size_t>(n), std::vector<TracePoint>(indices.size()));
  executor.for_each(indices.size(), [&](std::size_t i) {
    const std::size_t k = indices[i];
    const std::size_t count = steps_before[k];
    for (int j = 0; j < n; ++j) {
      TracePoint& p = out.curves[static_cast<std::size_t>(j)][i];
      p.t = driving.times[k];
      if (count == 0) {
        p.z = std::polar(1.0, 2.0 * driving.lifted[k](j));
        continue;
      }
      // Within the last step the slit tip solves (h - theta)^2 = 2 a (t - s)
      // to leading order; start the backward flow a short time before the end.
      const LoewnerStep& last = chain.steps()[count - 1];
      const double delta0 = 1e-4 * last.duration;
      auto tip = [&](double tol) -> std::optional<Complex> {
        Complex h = last.drivers(j) + kI * std::sqrt(2.0 * a * delta0);
        if (!flow_zeta(chain, h, false, tol, 1e-14, count, delta0)) return std::nullopt;
        return std::exp(2.0 * kI * h);
      };
      const auto coarse = tip(options.tol);
      const auto fine = tip(options.tol / 32.0);
      if (!coarse || !fine) {
        p.z = std::polar(1.0, 2.0 * driving.lifted[k](j));
        p.error_estimate = std::numeric_limits<double>::infinity();
        p.accuracy_flag = true;
        continue;
      }
      p.z = *fine;
      p.error_estimate = std::abs(*fine - *coarse);
      p.accuracy_flag = p.error_estimate > options.flag_threshold;
    }
  });
  return out;
}

DrivingPaths generate_driver(DriverLaw law, const AngleConfig& cfg0, double a, double t_end,
                             const SimOptions& options, std::uint64_t path_index) {
  require_positive_a(a);
  options.validate();
  if (t_end < 0.0) throw ValidationError("t_end", "must be non-negative");
  if (law == DriverLaw::independent) return independent_driver(cfg0, a, t_end, options, path_index);
  return from_sde_path(simulate(cfg0, bessel_alpha(law, a), t_end, options, path_index), a, law);
}

DrivingPaths driver_from_increments(DriverLaw law, const AngleConfig& cfg0, double a, double dt,
                                    const Eigen::MatrixXd& increments, const SimOptions& options) {
  require_positive_a(a);
  return from_sde_path(simulate_with_increments(cfg0, bessel_alpha(law, a), dt, increments, options), a, law);
}

FactorMapValue factor_map_at(const SlitMapChain& joint, const SlitMapChain& own, double x,
                             const FlowOptions& options, double radius, int nodes) {
  if (own.n() != 1) throw ValidationError("own", "must be a one-slit chain");
  if (!(radius > 0.0) || nodes < 2) throw ValidationError("radius", "need a positive radius and >= 2 nodes");
  // The factor map is real on the real axis near x, so its values on the
  // lower half circle are conjugates of those on the upper half and the
  // Taylor coefficients reduce to averages over the upper nodes.
  FactorMapValue out;
  double c0 = 0.0, c1 = 0.0;
  for (int m = 0; m < nodes; ++m) {
    const double phi = kPi * (m + 0.5) / nodes;
    const Complex e = std::polar(1.0, phi);
    Complex u = x + radius * e;
    if (!flow_zeta(own, u, false, options.tol, options.absorb_radius, own.steps().size()) ||
        !flow_zeta(joint, u, true, options.tol, options.absorb_radius, joint.steps().size())) {
      out.absorbed = true;
      return out;
    }
    c0 += u.real();
    c1 += (u * std::conj(e)).real();
  }
  out.value = c0 / nodes;
  out.derivative = c1 / nodes / radius;
  return out;
}

}  // namespace nrsle
