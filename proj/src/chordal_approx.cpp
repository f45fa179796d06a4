#include "nrsle/chordal_approx.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nrsle/errors.hpp"
#include "nrsle/rng.hpp"

namespace nrsle {

namespace {

// Square root in the closed upper half plane; on the real axis the sign
// follows `side`.
Complex upper_sqrt(Complex q, double side) {
  Complex r = std::sqrt(q);
  if (r.imag() < 0.0 || (r.imag() == 0.0 && side < 0.0)) r = -r;
  return r;
}

Complex two_pole_field(Complex g, double a, const ChordalPair& x) { return a / (g - x.x1) + a / (g - x.x2); }

// Below this height a flowing point counts as swallowed.
constexpr double kAbsorbHeight = 1e-10;

// One RK4 recording step, subdivided so the step stays small against the
// squared distance to the nearer pole.
bool rk4_two_pole(Complex& g, double a, const ChordalPair& x, double dt) {
  double remaining = dt;
  while (remaining > 0.0) {
    const double d = std::min(std::abs(g - x.x1), std::abs(g - x.x2));
    if (g.imag() < kAbsorbHeight || d < kAbsorbHeight) return false;
    const double h = std::min(remaining, 0.02 * d * d / a);
    const Complex k1 = two_pole_field(g, a, x);
    const Complex k2 = two_pole_field(g + 0.5 * h * k1, a, x);
    const Complex k3 = two_pole_field(g + 0.5 * h * k2, a, x);
    const Complex k4 = two_pole_field(g + h * k3, a, x);
    g += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    remaining -= h;
    if (remaining < 1e-15 * dt) break;
  }
  return g.imag() >= kAbsorbHeight;
}

std::size_t block_length(const PairPath& path, double h) {
  const double ratio = h / path.dt;
  const auto m = static_cast<std::size_t>(std::llround(ratio));
  if (!(h > 0.0) || m == 0 || std::abs(ratio - static_cast<double>(m)) > 1e-9 * ratio)
    throw ValidationError("h", "must be a positive multiple of the recording step");
  return m;
}

}  // namespace

void ChordalOptions::validate() const {
  if (!(dt > 0.0)) throw ValidationError("dt", "must be positive");
  if (!(gap_floor > 0.0)) throw ValidationError("gap_floor", "must be positive");
}

std::size_t PairPath::first_gap_below(double u) const {
  for (std::size_t i = 0; i < points.size(); ++i)
    if (points[i].gap() <= u) return i;
  return steps() + 1;
}

PairPath pair_from_increments(const ChordalPair& start, double a, double dt, const Eigen::MatrixX2d& increments,
                              double gap_floor) {
  if (!(start.x1 < start.x2)) throw ValidationError("x1", "must be below x2");
  if (!(a > 0.25)) throw ValidationError("a", "need kappa < 8, i.e. a > 1/4");
  if (!(dt > 0.0)) throw ValidationError("dt", "must be positive");
  PairPath path;
  path.a = a;
  path.dt = dt;
  path.points.reserve(static_cast<std::size_t>(increments.rows()) + 1);
  path.points.push_back(start);
  Eigen::Index i = 0;
  for (; i < increments.rows(); ++i) {
    const ChordalPair& x = path.points.back();
    const double drift = a / (x.x1 - x.x2) * dt;
    const ChordalPair next{x.x1 + drift + increments(i, 0), x.x2 - drift + increments(i, 1)};
    path.points.push_back(next);
    if (next.gap() < gap_floor) {
      path.truncated = true;
      ++i;
      break;
    }
  }
  path.increments = increments.topRows(i);
  return path;
}

PairPath simulate_pair(const ChordalPair& start, double a, double t_end, const ChordalOptions& options,
                       std::uint64_t run_index) {
  options.validate();
  if (t_end < 0.0) throw ValidationError("t_end", "must be non-negative");
  const auto steps = static_cast<Eigen::Index>(std::llround(std::ceil(t_end / options.dt - 1e-9)));
  RandomStream rng(options.seed, options.stream_offset + run_index);
  const double scale = std::sqrt(options.dt);
  Eigen::MatrixX2d increments(steps, 2);
  for (Eigen::Index i = 0; i < steps; ++i) {
    increments(i, 0) = scale * rng.normal();
    increments(i, 1) = scale * rng.normal();
  }
  return pair_from_increments(start, a, options.dt, increments, options.gap_floor);
}

FlowTrajectory continuous_flow(const PairPath& path, Complex z, std::size_t sample_every) {
  if (!(z.imag() > 0.0)) throw ValidationError("z", "must lie in the upper half plane");
  if (sample_every == 0) throw ValidationError("sample_every", "must be positive");
  FlowTrajectory out;
  out.truncated = path.truncated;
  out.samples.push_back({0.0, z});
  Complex g = z;
  for (std::size_t i = 0; i < path.steps(); ++i) {
    if (!rk4_two_pole(g, path.a, path.points[i + 1], path.dt)) {
      out.absorbed = true;
      out.absorbed_at = path.dt * static_cast<double>(i + 1);
      return out;
    }
    if ((i + 1) % sample_every == 0) out.samples.push_back({path.dt * static_cast<double>(i + 1), g});
  }
  return out;
}

Complex VerticalSlitMap::operator()(Complex z) const {
  const Complex q = z - c;
  return c + upper_sqrt(q * q + s2, q.real());
}

Complex VerticalSlitMap::inverse(Complex w) const {
  const Complex q = w - c;
  return c + upper_sqrt(q * q - s2, q.real());
}

DiscreteApproximation::DiscreteApproximation(const PairPath& path, double h, std::size_t max_blocks,
                                             int points_per_piece)
    : h_(h) {
  if (points_per_piece < 1) throw ValidationError("points_per_piece", "must be positive");
  const std::size_t m = block_length(path, h);
  const std::size_t available = path.steps() / m;
  const std::size_t n_blocks = std::min(max_blocks, available);
  truncated_ = path.truncated && max_blocks > available;
  const double s2 = 2.0 * path.a * path.dt;
  const int R = points_per_piece;

  tips_.push_back(path.points.front());
  std::vector<VerticalSlitMap> first(m), second(m);
  std::vector<Complex> curve;
  for (std::size_t k = 0; k < n_blocks; ++k) {
    const ChordalPair tip = tips_.back();
    // Fine drivers X~ = X^ + (B - B_kh), frozen at the right end of each step.
    double b1 = 0.0, b2 = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      b1 += path.increments(static_cast<Eigen::Index>(k * m + i), 0);
      b2 += path.increments(static_cast<Eigen::Index>(k * m + i), 1);
      first[i] = {tip.x1 + b1, s2};
      second[i] = {tip.x2 + b2, s2};
    }

    // Slit 2 in the original coordinates, then its image under g~^1.
    curve.assign(1, tip.x2);
    for (std::size_t i = 0; i < m; ++i) {
      for (int r = 1; r <= R; ++r) {
        Complex p(second[i].c, std::sqrt(s2 * r / R));
        for (std::size_t j = i; j-- > 0;) p = second[j].inverse(p);
        curve.push_back(p);
      }
    }
    bool collided = false;
    for (Complex& p : curve) {
      for (const auto& map : first) p = map(p);
      if (!std::isfinite(p.real()) || !std::isfinite(p.imag())) collided = true;
    }
    if (curve.front().imag() != 0.0) curve.front().imag(0.0);

    // Zip the image of slit 2 with vertical slits.
    std::vector<VerticalSlitMap> block = first;
    for (std::size_t q = 1; q < curve.size() && !collided; ++q) {
      Complex p = curve[q];
      for (std::size_t j = first.size(); j < block.size(); ++j) p = block[j](p);
      if (!(p.imag() > kAbsorbHeight)) {
        collided = true;
        break;
      }
      block.push_back({p.real(), p.imag() * p.imag()});
    }
    if (collided) {
      truncated_ = true;
      break;
    }

    double x1 = first.back().c;
    for (std::size_t j = first.size(); j < block.size(); ++j) x1 = block[j](Complex(x1, 0.0)).real();
    const double x2 = block.back().c;
    if (!(x1 < x2)) {
      truncated_ = true;
      break;
    }
    block_maps_.push_back(std::move(block));
    tips_.push_back({x1, x2});
  }
}

Complex DiscreteApproximation::apply_block(std::size_t k, Complex z) const {
  for (const auto& map : block_maps_.at(k)) z = map(z);
  return z;
}

Complex DiscreteApproximation::evaluate(Complex z, std::size_t k) const {
  if (k > blocks()) throw ValidationError("k", "beyond the last block");
  for (std::size_t j = 0; j < k; ++j) z = apply_block(j, z);
  return z;
}

FlowTrajectory discrete_flow(const PairPath& path, Complex z, double h) {
  if (!(z.imag() > 0.0)) throw ValidationError("z", "must lie in the upper half plane");
  const DiscreteApproximation approx(path, h);
  FlowTrajectory out;
  out.truncated = approx.truncated();
  out.samples.push_back({0.0, z});
  Complex g = z;
  for (std::size_t k = 0; k < approx.blocks(); ++k) {
    g = approx.apply_block(k, g);
    if (!(g.imag() > kAbsorbHeight)) {
      out.absorbed = true;
      out.absorbed_at = h * static_cast<double>(k + 1);
      return out;
    }
    out.samples.push_back({h * static_cast<double>(k + 1), g});
  }
  return out;
}

double far_field_coefficient(const std::function<Complex(Complex)>& g, double radius, int nodes) {
  if (!(radius > 0.0) || nodes < 1) throw ValidationError("radius", "need radius > 0 and nodes >= 1");
  // On symmetric nodes in (0, pi) the odd harmonics of the real part cancel.
  double sum = 0.0;
  for (int m = 0; m < nodes; ++m) {
    const Complex z = std::polar(radius, std::numbers::pi * (m + 0.5) / nodes);
    sum += ((g(z) - z) * z).real();
  }
  return sum / nodes;
}

std::vector<Complex> default_k_grid() {
  std::vector<Complex> grid;
  for (double y : {1.25, 2.0, 3.0})
    for (double x : {-3.0, -1.5, 0.0, 1.5, 3.0}) grid.emplace_back(x, y);
  return grid;
}

namespace {

// Continuous images of the grid on the recording steps, up to step `last`.
struct ContinuousGrid {
  std::vector<std::vector<Complex>> values;  // [point][step]
  std::vector<std::size_t> alive;            // steps computed before absorption
};

ContinuousGrid continuous_grid(const PairPath& path, const std::vector<Complex>& grid, std::size_t last) {
  ContinuousGrid out;
  for (const Complex z : grid) {
    std::vector<Complex> values{z};
    Complex g = z;
    for (std::size_t i = 0; i < last; ++i) {
      if (!rk4_two_pole(g, path.a, path.points[i + 1], path.dt)) break;
      values.push_back(g);
    }
    out.alive.push_back(values.size() - 1);
    out.values.push_back(std::move(values));
  }
  return out;
}

std::size_t horizon_steps(const PairPath& path, double u) {
  const std::size_t tau = path.first_gap_below(u);
  const auto limit = static_cast<std::size_t>(std::floor(1.0 / (u * path.dt) + 1e-9));
  return std::min({tau, limit, path.steps()});
}

KResult discrepancy_from(const PairPath& path, double h, double u, const std::vector<Complex>& grid,
                         const ContinuousGrid& cont, std::size_t horizon) {
  const std::size_t m = block_length(path, h);
  const std::size_t needed = horizon / m;
  const DiscreteApproximation approx(path, h, needed);
  KResult out;
  out.truncated = approx.blocks() < needed;
  std::vector<Complex> images = grid;
  for (std::size_t k = 0; k <= approx.blocks(); ++k) {
    if (k > 0)
      for (Complex& g : images) g = approx.apply_block(k - 1, g);
    bool any = false;
    for (std::size_t p = 0; p < grid.size(); ++p) {
      const std::size_t step = k * m;
      if (step > cont.alive[p]) continue;
      const Complex exact = cont.values[p][step];
      if (exact.imag() < u) continue;
      out.K = std::max(out.K, std::abs(images[p] - exact));
      any = true;
    }
    if (any) ++out.blocks_used;
  }
  return out;
}

}  // namespace

KResult discrepancy_K(const PairPath& path, double h, double u, const std::vector<Complex>& grid) {
  if (!(u > 0.0)) throw ValidationError("u", "must be positive");
  const std::size_t horizon = horizon_steps(path, u);
  return discrepancy_from(path, h, u, grid, continuous_grid(path, grid, horizon), horizon);
}

ConvergenceStudy convergence_study(const ConvergenceSetup& setup, const ChordalOptions& options,
                                   Executor& executor) {
  options.validate();
  if (!(setup.u > 0.0)) throw ValidationError("u", "must be positive");
  if (setup.h_list.size() < 2) throw ValidationError("h_list", "need at least two step sizes");
  if (setup.n_runs == 0) throw ValidationError("n_runs", "must be positive");
  const std::vector<Complex> grid = default_k_grid();
  const std::size_t H = setup.h_list.size();

  ConvergenceStudy study;
  study.K.assign(H, std::vector<double>(setup.n_runs, 0.0));
  std::vector<char> truncated(setup.n_runs, 0);
  executor.for_each(setup.n_runs, [&](std::size_t r) {
    PairPath path;
    if (setup.zero_noise) {
      const auto steps = static_cast<Eigen::Index>(std::llround(1.0 / (setup.u * options.dt)));
      path = pair_from_increments(setup.start, setup.a, options.dt, Eigen::MatrixX2d::Zero(steps, 2),
                                  options.gap_floor);
    } else {
      path = simulate_pair(setup.start, setup.a, 1.0 / setup.u, options, r);
    }
    const std::size_t horizon = horizon_steps(path, setup.u);
    const ContinuousGrid cont = continuous_grid(path, grid, horizon);
    bool cut = path.truncated && horizon == path.steps();
    for (std::size_t i = 0; i < H; ++i) {
      const KResult k = discrepancy_from(path, setup.h_list[i], setup.u, grid, cont, horizon);
      study.K[i][r] = k.K;
      cut = cut || k.truncated;
    }
    truncated[r] = cut;
  });
  study.truncated.assign(truncated.begin(), truncated.end());

  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < H; ++i) {
    std::vector<double> kept;
    for (std::size_t r = 0; r < setup.n_runs; ++r)
      if (!truncated[r]) kept.push_back(study.K[i][r]);
    if (kept.empty()) throw ValidationError("n_runs", "insufficient data: every run was truncated");
    const auto mid = kept.begin() + static_cast<std::ptrdiff_t>(kept.size() / 2);
    std::nth_element(kept.begin(), mid, kept.end());
    double median = *mid;
    if (kept.size() % 2 == 0) median = 0.5 * (median + *std::max_element(kept.begin(), mid));
    study.rows.push_back({setup.h_list[i], median, kept.size()});
    if (median > 0.0) {
      xs.push_back(std::log(setup.h_list[i]));
      ys.push_back(std::log(median));
    }
  }

  study.monotone = true;
  for (std::size_t i = 1; i < H; ++i) {
    const bool finer = setup.h_list[i] < setup.h_list[i - 1];
    const double prev = study.rows[i - 1].median_K, cur = study.rows[i].median_K;
    if (finer ? !(cur < prev) : !(cur > prev)) study.monotone = false;
  }

  if (xs.size() >= 2) {
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i] / n, my += ys[i] / n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) sxx += (xs[i] - mx) * (xs[i] - mx), sxy += (xs[i] - mx) * (ys[i] - my);
    study.order = sxy / sxx;
    if (xs.size() > 2) {
      double rss = 0.0;
      for (std::size_t i = 0; i < xs.size(); ++i) {
        const double e = ys[i] - my - study.order * (xs[i] - mx);
        rss += e * e;
      }
      study.order_stderr = std::sqrt(rss / (n - 2.0) / sxx);
    }
  }
  study.order_ok = study.order >= 0.3;
  return study;
}

}  // namespace nrsle
