#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "nrsle/executor.hpp"
#include "nrsle/rng.hpp"

using nrsle::Philox4x32;
using nrsle::RandomStream;

// Known-answer vectors published with the Random123 reference implementation.
TEST_CASE("philox known answers") {
  using C = Philox4x32::Counter;
  using K = Philox4x32::Key;
  CHECK(Philox4x32::block(C{0, 0, 0, 0}, K{0, 0}) == C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(Philox4x32::block(C{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, K{0xffffffff, 0xffffffff}) ==
        C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox4x32::block(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, K{0xa4093822, 0x299f31d0}) ==
        C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are independent of consumption order") {
  RandomStream a(42, 7), b(42, 7), other(42, 8);
  std::vector<double> first;
  for (int i = 0; i < 10; ++i) first.push_back(a.normal());
  for (int i = 0; i < 1000; ++i) other.normal();
  for (int i = 0; i < 10; ++i) CHECK(b.normal() == first[static_cast<std::size_t>(i)]);
  RandomStream c(43, 7);
  CHECK(c.normal() != first[0]);
}

TEST_CASE("uniform and normal moments") {
  RandomStream rng(1, 0);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0, sn4 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
    sn4 += z * z * z * z;
  }
  CHECK(std::abs(su / n - 0.5) < 5 * std::sqrt(1.0 / 12 / n));
  CHECK(std::abs(sn / n) < 5 / std::sqrt(double(n)));
  CHECK(std::abs(sn2 / n - 1.0) < 5 * std::sqrt(2.0 / n));
  CHECK(std::abs(sn4 / n - 3.0) < 5 * std::sqrt(96.0 / n));
}

TEST_CASE("thread pool visits every index once and rethrows") {
  nrsle::ThreadPoolExecutor pool(4);
  std::vector<int> hits(1000, 0);
  pool.for_each(hits.size(), [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) REQUIRE(h == 1);
  CHECK_THROWS_AS(pool.for_each(100, [](std::size_t i) {
    if (i == 37) throw std::runtime_error("boom");
  }), std::runtime_error);
}
