#pragma once

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sfpe/interval.hpp"
#include "sfpe/rng.hpp"

namespace sfpe {

/// One realization of a coefficient sampler before spectral stats are known.
struct RawDraw {
  std::vector<Eigen::MatrixXd> matrices;  // d x d each
  Eigen::VectorXd shift;                  // d
};

/// One realization ((A_{r,j})_j, b_r) with per-term singular value stats.
struct CoefficientDraw {
  std::vector<Eigen::MatrixXd> matrices;
  Eigen::VectorXd shift;
  std::vector<double> alphas;    // smallest singular value per term
  std::vector<double> opnorms;   // largest singular value per term
};

/// Two largest entries of alphas plus the count of terms whose singular
/// value range lies inside a supplied interval. alpha_sec is 0 when a draw
/// has fewer than two terms.
struct SpectralSummary {
  double alpha_max = 0;
  double alpha_sec = 0;
  int n_interval = 0;
};

enum class SumGuard { kFiniteTerms, kTailBounded };

/// System of distributional equations X_r =d= sum_j A_{r,j} X_{l_r(j)} + b_r.
///
/// Equations and term positions are 0-based. Samplers must be pure
/// functions of the supplied random stream so that draws are reproducible
/// from the stream alone.
class EquationSystem {
 public:
  using Sampler = std::function<RawDraw(SplitRng&)>;
  using IndexMap = std::function<int(int)>;  // term position -> equation

  EquationSystem(int m, int d, std::vector<IndexMap> index_map, std::vector<Sampler> samplers,
                 SumGuard guard = SumGuard::kFiniteTerms, int max_terms = 64,
                 double tail_epsilon = 0.0)
      : m_(m),
        d_(d),
        max_terms_(max_terms),
        guard_(guard),
        tail_epsilon_(tail_epsilon),
        index_map_(std::move(index_map)),
        samplers_(std::move(samplers)) {
    if (m_ < 1 || d_ < 1 || max_terms_ < 1)
      throw std::domain_error("EquationSystem: m, d and max_terms must be >= 1");
    if (d_ > 4) throw std::domain_error("EquationSystem: d > 4 is unsupported");
    if (static_cast<int>(index_map_.size()) != m_ || static_cast<int>(samplers_.size()) != m_)
      throw std::domain_error("EquationSystem: need one index map and sampler per equation");
  }

  int m() const { return m_; }
  int d() const { return d_; }
  int max_terms() const { return max_terms_; }
  SumGuard guard() const { return guard_; }
  double tail_epsilon() const { return tail_epsilon_; }

  int target(int r, int j) const {
    const int t = index_map_[static_cast<std::size_t>(r)](j);
    if (t < 0 || t >= m_) throw std::domain_error("index map points outside [0, m)");
    return t;
  }

  RawDraw raw_draw(int r, SplitRng& rng) const {
    if (r < 0 || r >= m_) throw std::domain_error("equation index out of range");
    return samplers_[static_cast<std::size_t>(r)](rng);
  }

  /// Known solution mean per equation (d x m). When set, the solver
  /// initializes pools at these columns and re-pins empirical means to them
  /// after every iteration; this selects the fixed point in the declared
  /// moment class (all zoo models pin their means).
  void set_mean_constraint(Eigen::MatrixXd means) {
    if (means.rows() != d_ || means.cols() != m_)
      throw std::domain_error("mean constraint must be d x m");
    mean_constraint_ = std::move(means);
  }
  const std::optional<Eigen::MatrixXd>& mean_constraint() const { return mean_constraint_; }

 private:
  int m_, d_, max_terms_;
  SumGuard guard_;
  double tail_epsilon_;
  std::vector<IndexMap> index_map_;
  std::vector<Sampler> samplers_;
  std::optional<Eigen::MatrixXd> mean_constraint_;
};

/// Fresh coefficient draw for equation r with spectral stats filled in.
CoefficientDraw sample_draw(const EquationSystem& system, int r, SplitRng& rng);

SpectralSummary spectral_summary(const CoefficientDraw& draw, const Interval& interval);

/// System of complex scalar equations Y_r =d= sum_j V_{r,j} Y_{l_r(j)} + B_r.
struct ComplexRawDraw {
  std::vector<std::complex<double>> coeffs;
  std::complex<double> shift;
};

struct ComplexSystem {
  int m = 1;
  std::vector<EquationSystem::IndexMap> index_map;
  std::vector<std::function<ComplexRawDraw(SplitRng&)>> samplers;
  SumGuard guard = SumGuard::kFiniteTerms;
  int max_terms = 64;
};

/// Embeds a complex system into a real one with d=2; each coefficient
/// V = x+iy becomes [[x,-y],[y,x]] and each shift B becomes (Re B, Im B).
EquationSystem embed_complex(const ComplexSystem& system);

}  // namespace sfpe
