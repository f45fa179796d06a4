#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>

namespace nrsle::detail {

inline double magnitude(const std::complex<double>& y) { return std::abs(y); }
inline double magnitude(const Eigen::Vector2d& y) { return y.norm(); }

// Adaptive RK4 with step doubling and local extrapolation over `duration`
// (direction -1 integrates the field backwards). `cap(y)` bounds the step
// from the distance to the nearest singularity and returns a non-positive
// value once the point counts as absorbed. Returns false on absorption.
template <class Y, class Field, class Cap>
bool rk4_flow(Y& y, double duration, double direction, const Field& field, const Cap& cap, double tol,
              double scale_floor, double& hint) {
  auto rk4 = [&](const Y& y0, double step) -> Y {
    const double s = direction * step;
    const Y k1 = field(y0);
    const Y k2 = field(Y(y0 + (0.5 * s) * k1));
    const Y k3 = field(Y(y0 + (0.5 * s) * k2));
    const Y k4 = field(Y(y0 + s * k3));
    return y0 + (s / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  };
  double done = 0.0;
  double h = hint > 0.0 ? hint : duration;
  while (duration - done > 1e-15 * duration) {
    const double limit = cap(y);
    if (!(limit > 0.0)) return false;
    const double step = std::min({h, limit, duration - done});
    const Y full = rk4(y, step);
    const Y half = rk4(rk4(y, 0.5 * step), 0.5 * step);
    const double err = magnitude(Y(half - full)) / 15.0;
    const double scale = std::max(scale_floor, magnitude(half));
    if (std::isfinite(err) && err <= tol * scale) {
      y = half + (half - full) / 15.0;
      done += step;
      h = step * (err > 0.0 ? std::clamp(0.9 * std::pow(tol * scale / err, 0.2), 0.2, 4.0) : 4.0);
    } else {
      h = step * (std::isfinite(err) ? std::clamp(0.9 * std::pow(tol * scale / err, 0.2), 0.1, 0.5) : 0.1);
      if (h < 1e-15 * std::max(1.0, duration)) return false;
    }
  }
  hint = h;
  return true;
}

}  // namespace nrsle::detail
