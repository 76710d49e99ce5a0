#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sfpe/equation.hpp"
#include "sfpe/rng.hpp"

namespace sfpe {

/// Empirical approximation of one marginal law: N samples, one per column.
struct SamplePool {
  Eigen::MatrixXd values;  // d x N
  int generation = 0;
  std::uint64_t seed = 0;  // master seed this pool's lineage derives from

  int dim() const { return static_cast<int>(values.rows()); }
  std::int64_t size() const { return values.cols(); }
  Eigen::VectorXd mean() const { return values.rowwise().mean(); }
  Eigen::MatrixXd covariance() const;
};

struct SolveOptions {
  int max_iters = 60;
  // tol > 0: fixed threshold. tol <= 0: automatic, stop when the distance
  // drops below 2x the resampling noise floor (the distance between two
  // independent bootstrap resamplings of the current pool).
  double tol = 0;
  double p = 2;                 // order of the convergence metric
  int threads = 1;
  int sliced_directions = 64;   // d >= 2 metric
  int consecutive_hits = 3;     // stopping rule
  double warm_start_sd = 0;     // >0: Gaussian warm start around the pinned mean
};

struct SolveDiagnostics {
  std::vector<std::vector<double>> distances;          // [iteration][equation]
  std::vector<std::vector<double>> noise_floors;       // bootstrap floors (auto mode)
  std::vector<std::vector<Eigen::VectorXd>> means;     // [iteration][equation]
  std::vector<std::vector<Eigen::MatrixXd>> covariances;
  std::vector<int> overflow_slots;                     // resampled slots per iteration
  bool converged = false;
  std::string stop_rule;
  int iterations = 0;
};

struct SolveResult {
  std::vector<SamplePool> pools;
  SolveDiagnostics diagnostics;
};

/// One application of the distributional map to empirical pools. Slot i of
/// output pool r is built from the stream root.fork(generation+1).fork(r)
/// .fork(i): one coefficient draw plus independent uniform indices into the
/// target pools, summed as sum_j A_{r,j} x_j + b_r.
std::vector<SamplePool> iterate(const EquationSystem& system, const std::vector<SamplePool>& pools,
                                const SplitRng& root, int threads = 1,
                                int* overflow_slots = nullptr);

/// Fixed-point iteration until the pool distance stays below tol for
/// `consecutive_hits` iterations or max_iters is reached. Non-convergence
/// returns the best pools with converged=false rather than throwing.
SolveResult solve(const EquationSystem& system, std::int64_t n, std::uint64_t seed,
                  const SolveOptions& opts = {});

/// Exact empirical l_p distance between equal-size 1-d samples (quantile
/// coupling); inputs must be sorted ascending.
double wasserstein_1d(std::span<const double> a_sorted, std::span<const double> b_sorted,
                      double p);

/// Average of wasserstein_1d over random unit-direction projections.
double sliced_distance(const SamplePool& a, const SamplePool& b, int directions, double p,
                       SplitRng& rng);

/// Distance between consecutive pools used by the solver: wasserstein_1d
/// for d=1, sliced_distance otherwise.
double pool_distance(const SamplePool& a, const SamplePool& b, double p, int directions,
                     SplitRng& rng);

/// Moment-consistency residual of the fixed point equation. Order 1 checks
/// the mean identity; order 2 checks the centered second-moment identity
/// (models with pinned zero/constant means). value is d x 1 for order 1 and
/// d x d for order 2; std_error is a matching conservative bound.
struct MomentResidual {
  Eigen::MatrixXd value;
  Eigen::MatrixXd std_error;
};

std::vector<MomentResidual> moment_residual(const EquationSystem& system,
                                            const std::vector<SamplePool>& pools, int order,
                                            std::int64_t n_draws, SplitRng& rng);

/// Kolmogorov bound ||F_n - F||_inf <= ((p+1) ||f||_inf^p)^{1/(1+p)} l_p^{p/(1+p)}.
double ks_rate_bound(double lp_distance, double f_sup, double p);

}  // namespace sfpe
