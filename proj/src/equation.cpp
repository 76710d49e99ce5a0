#include "sfpe/equation.hpp"

#include <algorithm>

#include "sfpe/spectral.hpp"

namespace sfpe {

CoefficientDraw sample_draw(const EquationSystem& system, int r, SplitRng& rng) {
  RawDraw raw = system.raw_draw(r, rng);
  if (static_cast<int>(raw.matrices.size()) > system.max_terms())
    throw std::runtime_error("sampler produced more than max_terms terms");
  if (raw.shift.size() != system.d())
    throw std::runtime_error("sampler shift has wrong dimension");
  CoefficientDraw draw;
  draw.matrices = std::move(raw.matrices);
  draw.shift = std::move(raw.shift);
  draw.alphas.reserve(draw.matrices.size());
  draw.opnorms.reserve(draw.matrices.size());
  for (const auto& a : draw.matrices) {
    if (a.rows() != system.d() || a.cols() != system.d())
      throw std::runtime_error("sampler matrix has wrong dimension");
    draw.alphas.push_back(min_gain(a));
    draw.opnorms.push_back(op_norm(a));
  }
  return draw;
}

SpectralSummary spectral_summary(const CoefficientDraw& draw, const Interval& interval) {
  SpectralSummary s;
  // two largest alphas; absent terms count as 0
  for (double a : draw.alphas) {
    if (a >= s.alpha_max) {
      s.alpha_sec = s.alpha_max;
      s.alpha_max = a;
    } else if (a > s.alpha_sec) {
      s.alpha_sec = a;
    }
  }
  for (std::size_t j = 0; j < draw.alphas.size(); ++j)
    if (interval.contains(draw.alphas[j]) && interval.contains(draw.opnorms[j])) ++s.n_interval;
  return s;
}

EquationSystem embed_complex(const ComplexSystem& system) {
  std::vector<EquationSystem::Sampler> samplers;
  samplers.reserve(system.samplers.size());
  for (const auto& cs : system.samplers) {
    samplers.push_back([cs](SplitRng& rng) {
      ComplexRawDraw c = cs(rng);
      RawDraw raw;
      raw.matrices.reserve(c.coeffs.size());
      for (auto v : c.coeffs) raw.matrices.push_back(embed_scalar(v));
      raw.shift = embed_vector(c.shift);
      return raw;
    });
  }
  return EquationSystem(system.m, 2, system.index_map, std::move(samplers), system.guard,
                        system.max_terms);
}

}  // namespace sfpe
