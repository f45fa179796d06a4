#include "nrsle/dyson_sde.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nrsle/errors.hpp"

namespace nrsle {
namespace {

constexpr double kPi = std::numbers::pi;

// cot sums (unit-alpha drift) and psi in one pass over the pairs.
double cot_sums_and_psi(const AngleVector& theta, AngleVector& cot_sum) {
  const Eigen::Index n = theta.size();
  cot_sum.setZero(n);
  double inv_sin2 = 0.0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index k = j + 1; k < n; ++k) {
      const double d = theta(j) - theta(k);
      const double s = std::sin(d);
      const double c = std::cos(d) / s;
      cot_sum(j) += c;
      cot_sum(k) -= c;
      inv_sin2 += 1.0 / (s * s);
    }
  return 2.0 * inv_sin2;
}

AngleVector gaussian_vector(Eigen::Index n, double scale, RandomStream& rng) {
  AngleVector v(n);
  for (Eigen::Index j = 0; j < n; ++j) v(j) = scale * rng.normal();
  return v;
}

struct PathEnd {
  DysonState state;
  double psi_integral = 0.0;
};

// Runs from `state` for time t on the uniform grid of options.dt (last step shortened).
PathEnd run_for(DysonState state, double t, const DysonStepper& stepper, const SimOptions& options,
                RandomStream& rng, StepDiagnostics& diagnostics) {
  PathEnd end{std::move(state), 0.0};
  if (!(t > 0.0)) return end;
  const auto steps = static_cast<std::uint64_t>(std::ceil(t / options.dt - 1e-9));
  const Eigen::Index n = end.state.theta.size();
  for (std::uint64_t k = 1; k <= steps; ++k) {
    const double h = k == steps ? t - static_cast<double>(steps - 1) * options.dt : options.dt;
    const AngleVector increment = gaussian_vector(n, std::sqrt(h), rng);
    end.psi_integral += stepper.advance(end.state, h, increment, rng, diagnostics);
  }
  return end;
}

void require_alpha(double alpha) {
  if (!(alpha > 0.0)) throw ValidationError("alpha", "must be positive");
}

void require_config(const AngleConfig& cfg) {
  if (cfg.size() >= 2 && cfg.min_gap() < kDegenerateGap)
    throw DegenerateConfigError("initial configuration has coincident angles");
}

SdePath record_path(const AngleConfig& cfg0, double alpha, const SimOptions& options, std::uint64_t path_index,
                    std::uint64_t steps, const std::function<double(std::uint64_t)>& step_length,
                    const std::function<AngleVector(std::uint64_t, double, RandomStream&)>& increment_for) {
  DysonStepper stepper(alpha, options);
  RandomStream rng(options.seed, options.stream_offset + path_index);
  SdePath path;
  path.alpha = alpha;
  DysonState state = stepper.make_state(cfg0.angles());
  double time = 0.0;
  double integral = 0.0;
  path.times.reserve(steps + 1);
  path.configs.reserve(steps + 1);
  path.lifted.reserve(steps + 1);
  path.psi_integral.reserve(steps + 1);
  path.times.push_back(0.0);
  path.configs.push_back(cfg0);
  path.lifted.push_back(state.theta);
  path.psi_integral.push_back(0.0);
  for (std::uint64_t k = 1; k <= steps; ++k) {
    const double h = step_length(k);
    const AngleVector increment = increment_for(k, h, rng);
    integral += stepper.advance(state, h, increment, rng, path.diagnostics);
    time += h;
    path.times.push_back(time);
    path.configs.push_back(AngleConfig::canonicalize(state.theta));
    path.lifted.push_back(state.theta);
    path.psi_integral.push_back(integral);
  }
  return path;
}

}  // namespace

void SimOptions::validate() const {
  if (!(dt > 0.0)) throw ValidationError("dt", "must be positive");
  if (!(gap_floor > 0.0 && gap_floor <= 0.5)) throw ValidationError("gap_floor", "must lie in (0, 0.5]");
  if (max_substep_depth < 0 || max_substep_depth > 60)
    throw ValidationError("max_substep_depth", "must lie in [0, 60]");
  if (n_paths < 1) throw ValidationError("n_paths", "must be at least 1");
}

DysonStepper::DysonStepper(double alpha, const SimOptions& options)
    : alpha_(alpha), scheme_(options.scheme), gap_floor_(options.gap_floor), max_depth_(options.max_substep_depth) {
  options.validate();
}

DysonState DysonStepper::make_state(const AngleVector& theta) const {
  DysonState state{theta, 0.0};
  AngleVector unused;
  state.psi = cot_sums_and_psi(theta, unused);
  return state;
}

bool DysonStepper::acceptable(const AngleVector& from, const AngleVector& to) const {
  const AngleVector old_gaps = cyclic_gaps(from);
  const AngleVector new_gaps = cyclic_gaps(to);
  for (Eigen::Index i = 0; i < new_gaps.size(); ++i) {
    if (!(new_gaps(i) > kDegenerateGap)) return false;
    const double smaller = std::min(new_gaps(i), old_gaps(i));
    if (smaller < gap_floor_ && std::abs(new_gaps(i) - old_gaps(i)) > 0.25 * smaller) return false;
  }
  return true;
}

double DysonStepper::advance(DysonState& state, double dt, const AngleVector& increment, RandomStream& bridge,
                             StepDiagnostics& diagnostics) const {
  ++diagnostics.steps;
  return advance_recursive(state, dt, increment, 0, bridge, diagnostics);
}

double DysonStepper::advance_recursive(DysonState& state, double dt, const AngleVector& increment, int depth,
                                       RandomStream& bridge, StepDiagnostics& diagnostics) const {
  AngleVector cot_sum;
  cot_sums_and_psi(state.theta, cot_sum);
  AngleVector proposal = state.theta + (alpha_ * dt) * cot_sum + increment;
  bool ok = acceptable(state.theta, proposal);
  if (ok && scheme_ == Scheme::heun) {
    AngleVector predicted_cot;
    cot_sums_and_psi(proposal, predicted_cot);
    proposal = state.theta + (0.5 * alpha_ * dt) * (cot_sum + predicted_cot) + increment;
    ok = acceptable(state.theta, proposal);
  }

  if (ok || depth >= max_depth_) {
    ++diagnostics.substeps;
    // At the depth cap, take the proposal unless it collapses a gap by more
    // than a factor of 4; otherwise hold the state for this substep.
    const AngleVector gaps = cyclic_gaps(proposal);
    if (!ok && !(gaps.minCoeff() > kDegenerateGap &&
                 (gaps.array() >= 0.25 * cyclic_gaps(state.theta).array()).all())) {
      ++diagnostics.rejections;
      return state.psi * dt;
    }
    AngleVector unused;
    const double new_psi = cot_sums_and_psi(proposal, unused);
    const double integral = 0.5 * (state.psi + new_psi) * dt;
    state.theta = proposal;
    state.psi = new_psi;
    return integral;
  }

  // Brownian bridge midpoint: W(dt/2) | W(dt) = increment.
  const AngleVector first = 0.5 * increment + gaussian_vector(increment.size(), std::sqrt(0.25 * dt), bridge);
  const AngleVector second = increment - first;
  double integral = advance_recursive(state, 0.5 * dt, first, depth + 1, bridge, diagnostics);
  integral += advance_recursive(state, 0.5 * dt, second, depth + 1, bridge, diagnostics);
  return integral;
}

AngleConfig step_dyson(const AngleConfig& cfg, double alpha, double dt, const AngleVector& noise,
                       const SimOptions& options, RandomStream& bridge, StepDiagnostics* diagnostics) {
  require_alpha(alpha);
  require_config(cfg);
  if (noise.size() != cfg.size()) throw ValidationError("noise", "must have one entry per angle");
  DysonStepper stepper(alpha, options);
  DysonState state = stepper.make_state(cfg.angles());
  StepDiagnostics local;
  stepper.advance(state, dt, noise, bridge, diagnostics ? *diagnostics : local);
  return AngleConfig::canonicalize(state.theta);
}

SdePath simulate(const AngleConfig& cfg0, double alpha, double t_end, const SimOptions& options,
                 std::uint64_t path_index) {
  require_alpha(alpha);
  require_config(cfg0);
  options.validate();
  if (t_end < 0.0) throw ValidationError("t_end", "must be non-negative");
  const auto steps = t_end > 0.0 ? static_cast<std::uint64_t>(std::ceil(t_end / options.dt - 1e-9)) : 0;
  const Eigen::Index n = cfg0.size();
  return record_path(
      cfg0, alpha, options, path_index, steps,
      [&](std::uint64_t k) { return k == steps ? t_end - static_cast<double>(steps - 1) * options.dt : options.dt; },
      [n](std::uint64_t, double h, RandomStream& rng) { return gaussian_vector(n, std::sqrt(h), rng); });
}

SdePath simulate_with_increments(const AngleConfig& cfg0, double alpha, double dt, const Eigen::MatrixXd& increments,
                                 const SimOptions& options, std::uint64_t path_index) {
  require_alpha(alpha);
  require_config(cfg0);
  options.validate();
  if (increments.cols() != cfg0.size()) throw ValidationError("increments", "need one column per angle");
  const auto steps = static_cast<std::uint64_t>(increments.rows());
  return record_path(
      cfg0, alpha, options, path_index, steps, [dt](std::uint64_t) { return dt; },
      [&increments](std::uint64_t k, double, RandomStream&) {
        return AngleVector(increments.row(static_cast<Eigen::Index>(k - 1)).transpose());
      });
}

Estimate check_martingale_N(const AngleConfig& cfg0, double alpha, double t, const SimOptions& options,
                            Executor& executor) {
  require_alpha(alpha);
  require_config(cfg0);
  const int n = cfg0.size();
  const ModelParams params{n, alpha};
  const DysonStepper stepper(alpha, options);
  const double log_f0 = log_product_F(cfg0.angles(), alpha);
  const double growth = alpha * alpha * n * (n * n - 1.0) / 2.0 * t;

  std::vector<double> values(options.n_paths);
  std::vector<StepDiagnostics> diagnostics(options.n_paths);
  executor.for_each(options.n_paths, [&](std::size_t i) {
    RandomStream rng(options.seed, options.stream_offset + i);
    const PathEnd end = run_for(stepper.make_state(cfg0.angles()), t, stepper, options, rng, diagnostics[i]);
    values[i] = std::exp(log_product_F(end.state.theta, alpha) - log_f0 + growth -
                         alpha * params.b_alpha() * end.psi_integral);
  });
  Estimate out = Estimate::from_samples(values);
  StepDiagnostics total;
  for (const auto& d : diagnostics) total += d;
  out.metadata["t"] = std::to_string(t);
  out.metadata["alpha"] = std::to_string(alpha);
  out.metadata["rejections"] = std::to_string(total.rejections);
  out.metadata["substeps"] = std::to_string(total.substeps);
  return out;
}

Estimate estimate_feynman_kac(const AngleConfig& cfg0, double alpha, double t, const SimOptions& options,
                              FeynmanKacMethod method, Executor& executor) {
  require_alpha(alpha);
  require_config(cfg0);
  const int n = cfg0.size();
  const ModelParams params{n, alpha};
  const bool tilted = method == FeynmanKacMethod::tilted;
  const DysonStepper stepper(tilted ? 2.0 * alpha : alpha, options);
  const double log_f0 = log_product_F(cfg0.angles(), alpha);
  const double decay = alpha * alpha * n * (n * n - 1.0) / 2.0 * t;
  const double killing = alpha * params.b_alpha();

  std::vector<double> values(options.n_paths);
  std::vector<StepDiagnostics> diagnostics(options.n_paths);
  executor.for_each(options.n_paths, [&](std::size_t i) {
    RandomStream rng(options.seed, options.stream_offset + i);
    const PathEnd end = run_for(stepper.make_state(cfg0.angles()), t, stepper, options, rng, diagnostics[i]);
    values[i] = tilted ? std::exp(log_f0 - log_product_F(end.state.theta, alpha) - decay)
                       : std::exp(-killing * end.psi_integral);
  });
  Estimate out = Estimate::from_samples(values);
  StepDiagnostics total;
  for (const auto& d : diagnostics) total += d;
  out.metadata["t"] = std::to_string(t);
  out.metadata["alpha"] = std::to_string(alpha);
  out.metadata["method"] = tilted ? "tilted" : "direct";
  out.metadata["rejections"] = std::to_string(total.rejections);
  return out;
}

std::vector<TimedEstimate> feynman_kac_curve(const AngleConfig& cfg0, double alpha, const std::vector<double>& times,
                                             const SimOptions& options, FeynmanKacMethod method, Executor& executor) {
  std::vector<TimedEstimate> out;
  out.reserve(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    SimOptions block = options;
    block.stream_offset = options.stream_offset + k * options.n_paths;
    out.push_back({times[k], estimate_feynman_kac(cfg0, alpha, times[k], block, method, executor)});
  }
  return out;
}

std::vector<AngleConfig> sample_invariant(int n, double alpha, double burn_in, std::size_t n_samples,
                                          const SimOptions& options, Executor& executor, double thin) {
  require_alpha(alpha);
  if (n < 2 || n > kMaxAngles) throw ValidationError("n", "must be between 2 and 16");
  if (!(thin > 0.0)) throw ValidationError("thin", "must be positive");
  const DysonStepper stepper(alpha, options);
  const std::size_t chains = options.n_paths;
  const std::size_t per_chain = (n_samples + chains - 1) / chains;

  std::vector<std::vector<AngleConfig>> per_chain_samples(chains);
  std::vector<StepDiagnostics> diagnostics(chains);
  executor.for_each(chains, [&](std::size_t c) {
    RandomStream rng(options.seed, options.stream_offset + c);
    const AngleConfig start = AngleConfig::equally_spaced(n, kPi * rng.uniform());
    PathEnd end = run_for(stepper.make_state(start.angles()), burn_in, stepper, options, rng, diagnostics[c]);
    auto& samples = per_chain_samples[c];
    samples.reserve(per_chain);
    for (std::size_t s = 0; s < per_chain; ++s) {
      end = run_for(std::move(end.state), thin, stepper, options, rng, diagnostics[c]);
      samples.push_back(AngleConfig::canonicalize(end.state.theta));
    }
  });
  std::vector<AngleConfig> out;
  out.reserve(n_samples);
  for (const auto& chain : per_chain_samples)
    for (const auto& cfg : chain) {
      if (out.size() == n_samples) break;
      out.push_back(cfg);
    }
  return out;
}

StationaryGapLaw::StationaryGapLaw(double alpha, int table_size) {
  require_alpha(alpha);
  const auto m = static_cast<std::size_t>(std::max(3, table_size));
  grid_.resize(m);
  cdf_.resize(m);
  const double h = kPi / static_cast<double>(m - 1);
  auto density = [alpha](double x) { return std::pow(std::abs(std::sin(x)), 2.0 * alpha); };
  cdf_[0] = 0.0;
  grid_[0] = 0.0;
  for (std::size_t k = 1; k < m; ++k) {
    grid_[k] = h * static_cast<double>(k);
    const double lo = grid_[k - 1];
    const double hi = grid_[k];
    // Simpson on each cell.
    cdf_[k] = cdf_[k - 1] + h / 6.0 * (density(lo) + 4.0 * density(0.5 * (lo + hi)) + density(hi));
  }
  const double total = cdf_.back();
  for (double& c : cdf_) c /= total;
}

double StationaryGapLaw::cdf(double x) const {
  if (x <= 0.0) return 0.0;
  if (x >= kPi) return 1.0;
  const double h = grid_[1];
  const auto k = std::min(static_cast<std::size_t>(x / h), grid_.size() - 2);
  const double frac = (x - grid_[k]) / h;
  return cdf_[k] + frac * (cdf_[k + 1] - cdf_[k]);
}

double StationaryGapLaw::quantile(double u) const {
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.begin()) return 0.0;
  if (it == cdf_.end()) return kPi;
  const auto k = static_cast<std::size_t>(it - cdf_.begin()) - 1;
  const double span = cdf_[k + 1] - cdf_[k];
  const double frac = span > 0.0 ? (u - cdf_[k]) / span : 0.0;
  return grid_[k] + frac * (grid_[k + 1] - grid_[k]);
}

DetailedBalanceReport check_detailed_balance_n2(double alpha, double t, int n_bins, const SimOptions& options,
                                                Executor& executor, std::uint64_t min_count) {
  require_alpha(alpha);
  if (n_bins < 2) throw ValidationError("n_bins", "must be at least 2");
  if (!(t > 0.0)) throw ValidationError("t", "must be positive");
  const StationaryGapLaw law(alpha);
  const DysonStepper stepper(alpha, options);
  const double width = kPi / n_bins;
  auto bin_of = [&](double x) { return std::clamp(static_cast<int>(x / width), 0, n_bins - 1); };

  std::vector<int> start_bin(options.n_paths), end_bin(options.n_paths);
  std::vector<StepDiagnostics> diagnostics(options.n_paths);
  executor.for_each(options.n_paths, [&](std::size_t i) {
    RandomStream rng(options.seed, options.stream_offset + i);
    const double x0 = std::clamp(law.quantile(rng.uniform()), 1e-9, kPi - 1e-9);
    AngleVector theta(2);
    theta << 0.0, x0;
    const PathEnd end = run_for(stepper.make_state(theta), t, stepper, options, rng, diagnostics[i]);
    start_bin[i] = bin_of(x0);
    end_bin[i] = bin_of(end.state.theta(1) - end.state.theta(0));
  });

  DetailedBalanceReport report;
  const auto nb = static_cast<std::size_t>(n_bins);
  report.counts.assign(nb, std::vector<std::uint64_t>(nb, 0));
  for (std::size_t i = 0; i < options.n_paths; ++i)
    ++report.counts[static_cast<std::size_t>(start_bin[i])][static_cast<std::size_t>(end_bin[i])];
  report.bin_weights.resize(nb);
  for (std::size_t i = 0; i < nb; ++i) report.bin_weights[i] = law.mass(width * i, width * (i + 1));

  std::vector<double> row_total(nb, 0.0);
  for (std::size_t i = 0; i < nb; ++i)
    for (std::size_t j = 0; j < nb; ++j) row_total[i] += static_cast<double>(report.counts[i][j]);

  for (std::size_t i = 0; i < nb; ++i) {
    for (std::size_t j = i + 1; j < nb; ++j) {
      const auto cij = report.counts[i][j];
      const auto cji = report.counts[j][i];
      if (cij < min_count || cji < min_count) {
        if (cij + cji > 0) ++report.pairs_excluded;
        continue;
      }
      const double pij = static_cast<double>(cij) / row_total[i];
      const double pji = static_cast<double>(cji) / row_total[j];
      const double wi = report.bin_weights[i];
      const double wj = report.bin_weights[j];
      const double sigma =
          std::sqrt(wi * wi * pij * (1.0 - pij) / row_total[i] + wj * wj * pji * (1.0 - pji) / row_total[j]);
      const double ratio = std::abs(pij * wi - pji * wj) / (3.0 * sigma);
      report.max_ratio_error = std::max(report.max_ratio_error, ratio);
      ++report.pairs_tested;
      if (ratio > 1.0) ++report.pairs_failed;
    }
  }
  for (std::size_t i = 0; i < nb; ++i) {
    if (row_total[i] < 10.0 * static_cast<double>(min_count)) continue;
    double tv = 0.0;
    for (std::size_t j = 0; j < nb; ++j)
      tv += std::abs(static_cast<double>(report.counts[i][j]) / row_total[i] - report.bin_weights[j]);
    report.max_row_tv_to_stationary = std::max(report.max_row_tv_to_stationary, 0.5 * tv);
  }
  return report;
}

}  // namespace nrsle
