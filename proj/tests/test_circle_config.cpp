#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "nrsle/circle_config.hpp"
#include "nrsle/rng.hpp"

using namespace nrsle;
constexpr double kPi = std::numbers::pi;

namespace {

AngleConfig random_config(int n, RandomStream& rng, double min_gap = 0.0) {
  for (;;) {
    AngleVector a(n);
    for (int j = 0; j < n; ++j) a(j) = kPi * rng.uniform();
    std::sort(a.data(), a.data() + n);
    const AngleConfig cfg = AngleConfig::canonicalize(a);
    if (cfg.min_gap() > min_gap) return cfg;
  }
}

}  // namespace

TEST_CASE("canonical form") {
  AngleVector a(3);
  a << 4.0, 0.5, -1.0;
  const AngleConfig cfg = AngleConfig::canonicalize(a);
  for (int j = 0; j < 3; ++j) {
    CHECK(cfg[j] >= 0.0);
    CHECK(cfg[j] < kPi);
  }
  CHECK(std::is_sorted(cfg.angles().data(), cfg.angles().data() + 3));
  CHECK(cfg.gaps().sum() == Catch::Approx(kPi));

  AngleVector bad(2);
  bad << 0.0, 3.5;
  CHECK_THROWS_AS(AngleConfig::from_ordered(bad), ValidationError);
  bad << 1.0, 1.0;
  CHECK_THROWS_AS(AngleConfig::from_ordered(bad), ValidationError);
}

TEST_CASE("functionals are rotation invariant and pi periodic") {
  RandomStream rng(3, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + trial % 5;
    const AngleConfig cfg = random_config(n, rng, 1e-3);
    const AngleConfig rot = cfg.rotated(10.0 * rng.uniform());
    CHECK(product_F(rot, 1.3) == Catch::Approx(product_F(cfg, 1.3)).epsilon(1e-10));
    CHECK(psi(rot) == Catch::Approx(psi(cfg)).epsilon(1e-9));
    AngleVector shifted = cfg.angles();
    shifted(0) += kPi;
    CHECK(psi_unchecked(shifted) == Catch::Approx(psi(cfg)).epsilon(1e-9));
  }
}

TEST_CASE("psi is minimized by equal spacing") {
  RandomStream rng(5, 0);
  for (int n = 2; n <= 8; ++n) {
    CHECK(psi(AngleConfig::equally_spaced(n, 0.3)) == Catch::Approx(psi_minimum(n)).epsilon(1e-12));
    CHECK(drift(AngleConfig::equally_spaced(n), 1.0).cwiseAbs().maxCoeff() < 1e-12);
    for (int k = 0; k < 20; ++k) CHECK(psi(random_config(n, rng, 1e-4)) >= psi_minimum(n) * (1 - 1e-12));
  }
}

TEST_CASE("cotangent identity") {
  RandomStream rng(11, 0);
  double worst = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const AngleConfig cfg = random_config(2 + trial % 5, rng, 1e-6);
    worst = std::max(worst, check_cot_identity(cfg).relative_discrepancy());
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("gradient and laplacian against finite differences") {
  RandomStream rng(13, 0);
  for (double alpha : {0.5, 1.0, 2.0}) {
    for (int trial = 0; trial < 100; ++trial) {
      const int n = 2 + trial % 4;
      const AngleConfig cfg = random_config(n, rng, 0.1);
      const AngleVector& th = cfg.angles();
      const double f0 = product_F(th, alpha);
      const AngleVector grad = f0 * drift(cfg, alpha);
      const double hg = 1e-5, hl = 1e-3;
      double lap = 0.0;
      for (int j = 0; j < n; ++j) {
        AngleVector p = th, m = th;
        p(j) += hg;
        m(j) -= hg;
        const double fd = (product_F(p, alpha) - product_F(m, alpha)) / (2 * hg);
        CHECK(std::abs(fd - grad(j)) <= 1e-4 * std::max(std::abs(grad(j)), f0));
        p = th;
        m = th;
        p(j) += hl;
        m(j) -= hl;
        lap += (product_F(p, alpha) - 2 * f0 + product_F(m, alpha)) / (hl * hl);
      }
      const double ratio = laplacian_ratio(cfg, alpha);
      CHECK(std::abs(lap / f0 - ratio) <= 1e-4 * std::max(1.0, std::abs(ratio)));
    }
  }
}

TEST_CASE("degenerate configurations are refused") {
  AngleVector a(3);
  a << 0.2, 0.2, 1.0;
  const AngleConfig cfg = AngleConfig::canonicalize(a);
  CHECK(cfg.min_gap() == 0.0);
  CHECK_THROWS_AS(psi(cfg), DegenerateConfigError);
  CHECK_THROWS_AS(drift(cfg, 1.0), DegenerateConfigError);
  CHECK_THROWS_AS(laplacian_ratio(cfg, 1.0), DegenerateConfigError);
  CHECK(product_F(cfg, 1.0) == 0.0);
}

TEST_CASE("lift continuation follows a wrap") {
  AngleVector prev(3);
  prev << 0.01, 1.0, 2.0;
  AngleVector moved = prev.array() - 0.02;
  const AngleVector lifted = lift_continuation(prev, AngleConfig::canonicalize(moved).angles());
  CHECK((lifted - moved).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("exponents") {
  const ModelParams p = ModelParams::make(2, 0.5);
  CHECK(p.decay_rate() == Catch::Approx(0.75));
  CHECK(p.b_alpha() == Catch::Approx(0.25));
  const KappaExponents k{4.0};
  CHECK(k.a() == 0.5);
  CHECK(k.b() == Catch::Approx(0.25));
  CHECK(k.b_tilde() == Catch::Approx(0.125));
  CHECK_THROWS_AS(ModelParams::make(1, 1.0), ValidationError);
}
