#pragma once

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sfpe/equation.hpp"

namespace sfpe {

/// Invalid model parameters; the CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Split-vector families on the unit simplex.
struct SplitVectorLaw {
  enum class Kind {
    kDeterministic,   // a fixed probability vector
    kBinaryUniform,   // (U, 1-U), the binary-search-tree kernel
    kDirichlet,       // symmetric Dirichlet(alpha,...,alpha)
  };
  Kind kind = Kind::kBinaryUniform;
  std::vector<double> fixed;  // kDeterministic
  double alpha = 1.0;         // kDirichlet
  int b = 2;

  static SplitVectorLaw deterministic(std::vector<double> v);
  static SplitVectorLaw binary_uniform();
  static SplitVectorLaw dirichlet(int b, double alpha);

  std::vector<double> sample(SplitRng& rng) const;
  double mu() const;           // -E[sum_j V_j ln V_j]
  double mean_sum_sq() const;  // E[sum_j V_j^2]
  bool is_deterministic() const { return kind == Kind::kDeterministic; }
};

struct ModelConfig {
  enum class Kind {
    kQuicksort,
    kQuicksort2d,
    kRrt,
    kUrnDet,
    kUrnRand,
    kUrnMulti,
    kSplit,
    kSplit2d,
  };
  Kind kind = Kind::kQuicksort;

  // urn_det(a, b, c, d)
  int urn_a = 4, urn_b = 1, urn_c = 1, urn_d = 4;
  // urn_rand(p1, p2)
  double p1 = 0.9, p2 = 0.8;
  // urn_multi: balanced replacement matrix and a large eigenvalue
  Eigen::MatrixXi replacement;
  std::complex<double> lambda_eig;
  // split models
  SplitVectorLaw split_law = SplitVectorLaw::binary_uniform();
  std::optional<double> c_const;  // split2d; default forces E[c(1 - sum V^2)] = 1

  // urn shift functions; defaults are the centered family below
  std::function<double(const std::vector<double>&)> urn_det_shift;  // b_r(D), both equations
  std::function<double(double, int)> urn_rand_shift;                // b'_r(U, F)

  static ModelConfig quicksort();
  static ModelConfig quicksort2d();
  static ModelConfig rrt();
  static ModelConfig urn_det(int a, int b, int c, int d);
  static ModelConfig urn_rand(double p1, double p2);
  static ModelConfig urn_multi(Eigen::MatrixXi replacement, std::complex<double> lambda);
  static ModelConfig split(SplitVectorLaw law);
  static ModelConfig split2d(SplitVectorLaw law, std::optional<double> c = std::nullopt);
};

/// Derived quantities exposed for reporting and tests.
struct ModelInfo {
  std::string name;
  int m = 1, d = 1;
  int urn_k = 0;              // K = a+b+1
  double lambda_urn = 0;      // urn scaling exponent
  int urn_row_sum = 0;        // S for urn_multi
  std::complex<double> lambda_eig;
  Eigen::VectorXcd eigen_mean;  // urn_multi pinned means
  double mu_split = 0;
  double split_c = 0;
  double dirichlet_alpha = 0;
};

ModelInfo describe(const ModelConfig& config);

/// Constructs the equation system with the model's exact coefficient laws
/// and pinned solution means. Throws ConfigError on invalid parameters.
EquationSystem build(const ModelConfig& config);

/// split2d with a deterministic split vector: the negative control whose
/// solved pool collapses onto a line/point and must fail the support audit.
EquationSystem degenerate_variant(const ModelConfig& config);

/// One paragraph per model for `models` output.
std::string models_help();

}  // namespace sfpe
