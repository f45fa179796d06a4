#include <catch_amalgamated.hpp>

#include <cmath>

#include "nrsle/chordal_approx.hpp"
#include "nrsle/errors.hpp"
#include "nrsle/rng.hpp"

using namespace nrsle;

namespace {

constexpr double kDt = 1.0 / 4096;

Eigen::MatrixX2d mirrored_increments(int steps, std::uint64_t seed) {
  RandomStream rng(seed, 0);
  Eigen::MatrixX2d m(steps, 2);
  for (int i = 0; i < steps; ++i) {
    m(i, 0) = std::sqrt(kDt) * rng.normal();
    m(i, 1) = -m(i, 0);
  }
  return m;
}

Complex final_value(const FlowTrajectory& f) { return f.samples.back().g; }

Complex continuous_map(const PairPath& path, Complex z) { return final_value(continuous_flow(path, z, path.steps())); }

}  // namespace

TEST_CASE("zero noise gap follows the Euler recursion") {
  const PairPath p = pair_from_increments({-0.3, 0.2}, 0.7, 0.01, Eigen::MatrixX2d::Zero(50, 2));
  REQUIRE(p.steps() == 50);
  for (std::size_t i = 0; i < p.steps(); ++i) {
    const double z = p.points[i].gap();
    CHECK(p.points[i + 1].gap() == Catch::Approx(z + 2 * 0.7 / z * 0.01).epsilon(1e-14));
  }
}

TEST_CASE("mirrored noise keeps the pair symmetric") {
  const PairPath p = pair_from_increments({-1.0, 1.0}, 0.5, kDt, mirrored_increments(4096, 3));
  for (const auto& x : p.points) CHECK(x.x1 == -x.x2);
}

TEST_CASE("one-step gap drift is 2a/Z") {
  ChordalOptions o;
  o.dt = 1e-3;
  o.seed = 11;
  const double a = 0.6;
  double sum = 0.0, sum2 = 0.0;
  const int runs = 20000;
  for (int r = 0; r < runs; ++r) {
    const PairPath p = simulate_pair({0.0, 1.5}, a, o.dt, o, r);
    const double rate = (p.points[1].gap() - 1.5) / o.dt;
    sum += rate;
    sum2 += rate * rate;
  }
  const double mean = sum / runs;
  const double se = std::sqrt((sum2 / runs - mean * mean) / runs);
  CHECK(std::abs(mean - 2 * a / 1.5) < 3 * se);
}

TEST_CASE("gap floor truncations") {
  ChordalOptions o;
  o.dt = 1e-4;
  o.seed = 77;
  int at_one = 0, at_half = 0;
  for (int r = 0; r < 1000; ++r) {
    at_one += simulate_pair({-1.0, 1.0}, 1.0, 1.0, o, r).truncated;
    at_half += simulate_pair({-1.0, 1.0}, 0.5, 1.0, o, r).truncated;
  }
  CHECK(at_one == 0);
  // At a = 1/2 the gap is a two-dimensional Bessel process: it does come
  // within 1e-3 now and then.
  CHECK(at_half < 30);
  CHECK_THROWS_AS(simulate_pair({-1.0, 1.0}, 0.25, 1.0, o), ValidationError);
  CHECK_THROWS_AS(simulate_pair({1.0, -1.0}, 0.5, 1.0, o), ValidationError);
}

TEST_CASE("continuous flow Taylor expansion far from the axis") {
  const double a = 0.5;
  const Complex z(0.3, 10.0);
  double previous = 0.0;
  for (int steps : {64, 32}) {
    const PairPath p = pair_from_increments({-1.0, 1.0}, a, kDt, Eigen::MatrixX2d::Zero(steps, 2));
    const double t = p.t_end();
    const Complex taylor = z + t * (a / (z + 1.0) + a / (z - 1.0));
    const double err = std::abs(continuous_map(p, z) - taylor);
    CHECK(err < 1e-6);
    if (previous > 0.0) CHECK(previous / err > 3.0);
    previous = err;
  }
}

TEST_CASE("continuous flow has hcap 2at") {
  ChordalOptions o;
  o.seed = 5;
  const PairPath p = simulate_pair({-1.0, 1.0}, 0.5, 1.0, o);
  REQUIRE_FALSE(p.truncated);
  const double hcap = far_field_coefficient([&](Complex z) { return continuous_map(p, z); });
  CHECK(std::abs(hcap - 2 * 0.5 * p.t_end()) < 1e-4);
}

TEST_CASE("symmetric configuration keeps the imaginary axis") {
  const PairPath p = pair_from_increments({-1.0, 1.0}, 0.5, kDt, mirrored_increments(2048, 4));
  const FlowTrajectory f = continuous_flow(p, Complex(0.0, 1.5));
  for (const auto& s : f.samples) CHECK(std::abs(s.g.real()) < 1e-12);
}

TEST_CASE("heights decrease along the flow") {
  ChordalOptions o;
  o.seed = 8;
  const PairPath p = simulate_pair({-1.0, 1.0}, 0.5, 1.0, o);
  for (const Complex z : {Complex(-1.0, 0.05), Complex(0.0, 0.5), Complex(2.0, 1.0)}) {
    const FlowTrajectory f = continuous_flow(p, z);
    for (std::size_t i = 1; i < f.samples.size(); ++i) CHECK(f.samples[i].g.imag() <= f.samples[i - 1].g.imag());
  }
  CHECK_THROWS_AS(continuous_flow(p, Complex(0.0, -1.0)), ValidationError);
}

TEST_CASE("vertical slit map") {
  const VerticalSlitMap m{0.4, 0.09};
  CHECK(std::abs(m(Complex(0.4, 0.3)) - Complex(0.4, 0.0)) < 1e-12);
  for (const Complex z : {Complex(1.0, 0.5), Complex(-2.0, 0.01), Complex(0.4, 2.0), Complex(3.0, 0.0)}) {
    const Complex w = m(z);
    CHECK(w.imag() >= 0.0);
    CHECK(std::abs(m.inverse(w) - z) < 1e-12);
  }
  // Real points on either side of the base stay on their side.
  CHECK(m(Complex(0.39, 0.0)).real() < 0.4 - 0.29);
  CHECK(m(Complex(0.41, 0.0)).real() > 0.4 + 0.29);
  const double hcap = far_field_coefficient([&](Complex z) { return m(z); });
  CHECK(hcap == Catch::Approx(0.045).epsilon(1e-6));
}

TEST_CASE("discrete tips follow the one-block recursion") {
  // Zero noise: X^_{k+1} = X^_k + a h/(X^_k - X^_{3-j}) + o(h).
  const double a = 0.5;
  double previous = 0.0;
  for (double h : {1.0 / 16, 1.0 / 32, 1.0 / 64}) {
    const auto steps = static_cast<int>(h / kDt);
    const PairPath p = pair_from_increments({-1.0, 1.0}, a, kDt, Eigen::MatrixX2d::Zero(steps, 2));
    const DiscreteApproximation d(p, h);
    REQUIRE(d.blocks() == 1);
    const ChordalPair tip = d.tips().back();
    const double err = std::max(std::abs(tip.x1 - (-1.0 - a * h / 2)), std::abs(tip.x2 - (1.0 + a * h / 2)));
    CHECK(err < 0.1 * a * h / 2);
    if (previous > 0.0) CHECK(previous / err > 2.5);
    previous = err;
  }
}

TEST_CASE("mirrored noise keeps the discrete tips symmetric") {
  const PairPath p = pair_from_increments({-1.0, 1.0}, 0.5, kDt, mirrored_increments(4096, 9));
  for (double h : {1.0 / 16, 1.0 / 128}) {
    const DiscreteApproximation d(p, h);
    CHECK(d.blocks() == static_cast<std::size_t>(std::llround(1.0 / h)));
    for (const auto& tip : d.tips()) CHECK(std::abs(tip.x1 + tip.x2) < 1e-5);
  }
}

TEST_CASE("discrete hcap deficit") {
  // Mapping out one slit after the other loses the interaction capacity,
  // O(h^2) per block.
  double previous = 0.0;
  for (double h : {1.0 / 4, 1.0 / 8, 1.0 / 16}) {
    const auto steps = static_cast<int>(h / kDt);
    const PairPath p = pair_from_increments({-1.0, 1.0}, 0.5, kDt, Eigen::MatrixX2d::Zero(steps, 2));
    const DiscreteApproximation d(p, h);
    const double disc = far_field_coefficient([&](Complex z) { return d.evaluate(z, 1); });
    const double cont = far_field_coefficient([&](Complex z) { return continuous_map(p, z); });
    const double deficit = cont - disc;
    CHECK(deficit > 0.0);
    if (previous > 0.0) CHECK(previous / deficit == Catch::Approx(4.0).margin(0.5));
    previous = deficit;
  }
  ChordalOptions o;
  o.seed = 5;
  const PairPath p = simulate_pair({-1.0, 1.0}, 0.5, 1.0, o);
  const DiscreteApproximation fine(p, 1.0 / 512);
  const double hcap = far_field_coefficient([&](Complex z) { return fine.evaluate(z, fine.blocks()); });
  CHECK(std::abs(hcap - p.t_end()) < 1e-4);
}

TEST_CASE("discrete flow samples every block") {
  ChordalOptions o;
  o.seed = 6;
  const PairPath p = simulate_pair({-1.0, 1.0}, 0.5, 1.0, o);
  const FlowTrajectory f = discrete_flow(p, Complex(0.5, 2.0), 1.0 / 32);
  CHECK(f.samples.size() == 33);
  CHECK(std::abs(f.samples.back().g - continuous_map(p, Complex(0.5, 2.0))) < 0.01);
  CHECK_THROWS_AS(discrete_flow(p, Complex(0.5, 2.0), 1.5 * kDt), ValidationError);
}

TEST_CASE("K decreases with h on a fixed path") {
  ChordalOptions o;
  o.seed = 5;
  const PairPath p = simulate_pair({-1.0, 1.0}, 0.5, 1.0, o);
  double previous = INFINITY;
  for (int e = 4; e <= 9; ++e) {
    const KResult k = discrepancy_K(p, std::ldexp(1.0, -e), 1.0, default_k_grid());
    CHECK_FALSE(k.truncated);
    CHECK(k.blocks_used > 0);
    CHECK(k.K < previous);
    previous = k.K;
  }
}

TEST_CASE("zero noise convergence has order one") {
  ConvergenceSetup s;
  s.h_list = {1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128};
  s.n_runs = 1;
  s.zero_noise = true;
  const ConvergenceStudy study = convergence_study(s, ChordalOptions{});
  CHECK(study.monotone);
  CHECK(study.order == Catch::Approx(1.0).margin(0.05));
}

TEST_CASE("convergence study input errors") {
  ConvergenceSetup s;
  s.h_list = {1.0 / 16};
  CHECK_THROWS_AS(convergence_study(s, ChordalOptions{}), ValidationError);
  s.h_list = {1.0 / 16, 1.0 / 32};
  s.n_runs = 3;
  ChordalOptions o;
  o.gap_floor = 1.99;
  CHECK_THROWS_AS(convergence_study(s, o), ValidationError);
}
