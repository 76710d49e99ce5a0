#include "sfpe/rng.hpp"

#include <cmath>
#include <numbers>

namespace sfpe {

double SplitRng::normal() {
  const double u1 = uniform_open();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double SplitRng::gamma(double shape) {
  if (!(shape > 0)) throw std::domain_error("gamma: shape must be positive");
  // Marsaglia-Tsang squeeze; shapes below 1 boosted through Gamma(a+1) U^{1/a}
  if (shape < 1.0) {
    const double u = uniform_open();
    return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_open();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

std::vector<double> SplitRng::dirichlet(double alpha, int k) {
  if (k < 1) throw std::domain_error("dirichlet: k must be positive");
  std::vector<double> out(static_cast<std::size_t>(k));
  for (;;) {
    double sum = 0;
    for (auto& v : out) {
      v = gamma(alpha);
      sum += v;
    }
    if (sum <= 0) continue;
    bool ok = true;
    for (auto& v : out) {
      v /= sum;
      if (v <= 0.0) ok = false;
    }
    if (ok) return out;
  }
}

}  // namespace sfpe
