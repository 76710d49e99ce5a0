#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace sfpe {

/// Counter-based splittable random stream.
///
/// A stream is identified by a 64-bit key; the i-th output is
/// finalize(key + i*gamma) (the splitmix64 construction), so draws depend
/// only on (key, position) and never on thread scheduling. Child streams
/// are derived by hashing (key, path word); samplers that need one stream
/// per (iteration, equation, slot) fork along that path.
class SplitRng {
 public:
  explicit SplitRng(std::uint64_t seed) : key_(seed) {}

  /// Derived stream for path word `w`. Forking does not disturb this
  /// stream's own counter.
  SplitRng fork(std::uint64_t w) const {
    std::uint64_t h = finalize(key_ + 0x8e9c5c7240a6a3b1ull);
    h ^= finalize(w + 0xd1b54a32d192ed03ull);
    return SplitRng(finalize(h));
  }

  std::uint64_t next_u64() { return finalize(key_ + (++n_) * kGamma); }

  /// Uniform on [0,1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on (0,1); safe under log().
  double uniform_open() {
    double u = uniform();
    while (u <= 0.0) u = uniform();
    return u;
  }

  /// Unbiased integer in [0,n). Lemire multiply-shift with rejection.
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw std::domain_error("uniform_index: n must be positive");
    std::uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      std::uint64_t threshold = (0ull - n) % n;
      while (lo < threshold) {
        x = next_u64();
        m = static_cast<__uint128_t>(x) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Standard normal via Box-Muller; consumes exactly two uniforms.
  double normal();

  /// Gamma(shape, 1) via Marsaglia-Tsang; shape > 0.
  double gamma(double shape);

  /// Symmetric Dirichlet(alpha,...,alpha) with k components, all entries
  /// strictly positive (zero draws are rejected and resampled).
  std::vector<double> dirichlet(double alpha, int k);

  std::uint64_t key() const { return key_; }

  static std::uint64_t finalize(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ull;

  std::uint64_t key_;
  std::uint64_t n_ = 0;
};

}  // namespace sfpe
