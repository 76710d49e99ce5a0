#include <doctest.h>

#include <cmath>
#include <set>

#include "sfpe/rng.hpp"
#include "sfpe/stats.hpp"

using sfpe::SplitRng;

TEST_CASE("splitmix64 reference sequence") {
  // published first outputs for seed 0
  SplitRng rng(0);
  CHECK(rng.next_u64() == 0xe220a8397b1dcdafull);
  CHECK(rng.next_u64() == 0x6e789e6aa1b965f4ull);
  CHECK(rng.next_u64() == 0x06c45d188009454full);
  CHECK(rng.next_u64() == 0xf88bb8a8724c81ecull);

  SplitRng rng2(0x123456789abcdef0ull);
  CHECK(rng2.next_u64() == 0x161922c645ce50e8ull);
  CHECK(rng2.next_u64() == 0xad760cafa1697b60ull);
}

TEST_CASE("uniform values for seed 42") {
  SplitRng rng(42);
  CHECK(rng.uniform() == doctest::Approx(0.74156487877182331).epsilon(1e-15));
  CHECK(rng.uniform() == doctest::Approx(0.1599103928769201).epsilon(1e-15));
  CHECK(rng.uniform() == doctest::Approx(0.27860113025513866).epsilon(1e-15));
}

TEST_CASE("streams are reproducible and forks are independent") {
  SplitRng a(7), b(7);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  // forking never disturbs the parent
  SplitRng c(7), d(7);
  (void)c.fork(1);
  for (int i = 0; i < 10; ++i) CHECK(c.next_u64() == d.next_u64());

  // distinct paths give distinct streams
  std::set<std::uint64_t> firsts;
  SplitRng root(9);
  for (std::uint64_t w = 0; w < 1000; ++w) {
    SplitRng child = root.fork(w);
    firsts.insert(child.next_u64());
  }
  CHECK(firsts.size() == 1000);
  CHECK(root.fork(3).fork(5).next_u64() != root.fork(5).fork(3).next_u64());
}

TEST_CASE("uniform_index is in range and roughly uniform") {
  SplitRng rng(1);
  std::vector<int> counts(10, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto k = rng.uniform_index(10);
    REQUIRE(k < 10);
    ++counts[static_cast<std::size_t>(k)];
  }
  for (int c : counts) CHECK(std::abs(c - n / 10) < 5 * std::sqrt(n / 10.0));
}

TEST_CASE("normal and gamma moments") {
  SplitRng rng(3);
  const int n = 200000;
  std::vector<double> z(n), g(n);
  for (auto& v : z) v = rng.normal();
  for (auto& v : g) v = rng.gamma(0.2);
  CHECK(sfpe::mean(z) == doctest::Approx(0).epsilon(0.0).scale(1).epsilon(0.01));
  CHECK(sfpe::variance(z) == doctest::Approx(1).epsilon(0.02));
  CHECK(sfpe::mean(g) == doctest::Approx(0.2).epsilon(0.02));       // E = shape
  CHECK(sfpe::variance(g) == doctest::Approx(0.2).epsilon(0.05));   // Var = shape
}

TEST_CASE("dirichlet sums to one with positive parts") {
  SplitRng rng(4);
  for (int i = 0; i < 1000; ++i) {
    const auto d = rng.dirichlet(0.2, 6);
    double sum = 0;
    for (double v : d) {
      CHECK(v > 0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}
