#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sfpe/models.hpp"
#include "sfpe/rng.hpp"

namespace sfpe {

/// Finite-n discrete processes whose scaled statistics converge to the
/// fixed-point solutions.
struct ProcessConfig {
  enum class Kind {
    kQuicksortCmp,        // comparison count of random-pivot quicksort
    kQuicksortCmpXch,     // (comparisons, exchanges); best effort
    kPolya,               // urn composition after n draws
    kRrtPathlen,          // total path length of a random recursive tree
    kSplitPathlen,        // Psi(T_n) of a Devroye split tree
    kSplitPathlenWiener,  // (Wiener index, Psi(T_n))
  };
  Kind kind = Kind::kQuicksortCmp;

  // polya
  Eigen::MatrixXi replacement;
  std::vector<std::int64_t> init;
  bool random_two_color = false;  // Bernoulli(p1)/Bernoulli(p2) diagonal rule
  double p1 = 0.9, p2 = 0.8;
  double lambda_exponent = 1.0;  // scaling exponent n^lambda

  // split trees: branch factor, capacity, retained balls, newborn threshold
  int b = 2, s = 1, s0 = 1, s1 = 1;
  SplitVectorLaw law = SplitVectorLaw::binary_uniform();

  static ProcessConfig quicksort_cmp();
  static ProcessConfig quicksort_cmp_xch();
  static ProcessConfig polya_det(Eigen::MatrixXi replacement, std::vector<std::int64_t> init);
  static ProcessConfig polya_rand(double p1, double p2, std::vector<std::int64_t> init);
  static ProcessConfig rrt_pathlen();
  static ProcessConfig split_pathlen(int b, int s, int s0, int s1, SplitVectorLaw law);
  static ProcessConfig split_pathlen_wiener(int b, int s, int s0, int s1, SplitVectorLaw law);
};

struct ProcessRun {
  std::vector<double> statistic;  // raw counts
  std::vector<double> scaled;     // (stat - center)/n^exp; see `centered`
  bool centered = false;          // true when an exact mean formula was used
};

/// Scaling exponent per statistic component.
std::vector<double> scaling_exponents(const ProcessConfig& config);

/// Exact mean of the raw statistic where a closed form exists
/// (quicksort comparisons, recursive-tree path length).
std::optional<std::vector<double>> exact_mean(const ProcessConfig& config, std::int64_t n);

ProcessRun run(const ProcessConfig& config, std::int64_t n, SplitRng& rng);

/// Batch of scaled statistics, one column per run. Centering uses the
/// exact mean when available (and requested), otherwise the batch mean.
Eigen::MatrixXd scaled_batch(const ProcessConfig& config, std::int64_t n, int runs, SplitRng& rng,
                             bool prefer_exact_center = true, int threads = 1);

}  // namespace sfpe
