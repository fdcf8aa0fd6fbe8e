#include "doctest.h"

#include <cmath>
#include <set>
#include <vector>

#include "mixim/rng.hpp"
#include "mixim/stats.hpp"

using mixim::RngStream;

TEST_CASE("philox known answers") {
  using A4 = std::array<std::uint32_t, 4>;
  using A2 = std::array<std::uint32_t, 2>;
  CHECK(RngStream::philox(A4{0, 0, 0, 0}, A2{0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(RngStream::philox(A4{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, A2{0xffffffff, 0xffffffff}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(RngStream::philox(A4{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, A2{0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("same seed and stream give the same sequence") {
  RngStream a(42, 7), b(42, 7), c(42, 8);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    differs = differs || x != c.next_u64();
  }
  CHECK(differs);
}

TEST_CASE("substreams are deterministic and distinct") {
  const RngStream root(5, 0);
  auto s1 = root.substream(1), s1b = root.substream(1), s2 = root.substream(2);
  CHECK(s1.next_u64() == s1b.next_u64());
  std::set<std::uint64_t> firsts;
  for (std::uint64_t k = 0; k < 1000; ++k) firsts.insert(root.substream(k).next_u64());
  CHECK(firsts.size() == 1000);
  CHECK(s2.next_u64() != root.substream(1).next_u64());
}

TEST_CASE("uniform lies in the open unit interval with correct moments") {
  RngStream r(1, 0);
  std::vector<double> u(200000);
  for (auto& v : u) {
    v = r.uniform();
    REQUIRE(v > 0.0);
    REQUIRE(v < 1.0);
  }
  CHECK(mixim::stats::mean(u) == doctest::Approx(0.5).epsilon(0.005));
  CHECK(mixim::stats::variance(u) == doctest::Approx(1.0 / 12.0).epsilon(0.01));
  const auto ks = mixim::stats::ks_one_sample(u, [](double x) { return std::clamp(x, 0.0, 1.0); });
  CHECK(ks.p_value > 0.001);
}

TEST_CASE("normal, exponential and gamma against their CDFs") {
  RngStream r(2, 0);
  std::vector<double> z(50000), e(50000), g(50000);
  for (auto& v : z) v = r.normal();
  for (auto& v : e) v = r.exponential();
  for (auto& v : g) v = r.gamma(2.0);
  CHECK(mixim::stats::ks_one_sample(z, [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }).p_value > 0.001);
  CHECK(mixim::stats::ks_one_sample(e, [](double x) { return x <= 0 ? 0.0 : 1.0 - std::exp(-x); }).p_value > 0.001);
  // Ga(2, 1) CDF: 1 - (1 + x) e^{-x}.
  CHECK(mixim::stats::ks_one_sample(g, [](double x) { return x <= 0 ? 0.0 : 1.0 - (1.0 + x) * std::exp(-x); })
            .p_value > 0.001);
}

TEST_CASE("gamma with small shape keeps its mean") {
  RngStream r(3, 0);
  double s = 0.0;
  const int n = 400000;
  for (int i = 0; i < n; ++i) s += r.gamma(0.2);
  // sd of the mean: sqrt(0.2 / n)
  CHECK(std::abs(s / n - 0.2) < 4.0 * std::sqrt(0.2 / n));
}
