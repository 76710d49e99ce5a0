#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sfpe/equation.hpp"
#include "sfpe/solver.hpp"

namespace sfpe {

enum class Verdict { kPass, kFail, kInconclusive };

const char* to_string(Verdict v);

struct ConditionEntry {
  Verdict verdict = Verdict::kInconclusive;
  double estimate = 0;
  double std_error = 0;
  std::int64_t n = 0;
  std::string note;
};

struct AuditOptions {
  double a1_floor = 1e-4;     // a_hat must clear this to pass (A1)
  double a2_r2_min = 0.95;    // log-log fit quality gate for (A2)
  double z = 2.5758293035489; // 99% two-sided normal quantile for CI gates
  double c7_beta = 1.0;       // caller-chosen (beta, x) for the (C7) estimate
  double c7_x = 10.0;
  std::vector<double> eta_ladder = {0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0};
  int threads = 1;
};

/// Per-condition verdicts for the coefficient-only conditions of one
/// equation, plus fitted constants and the feasible eta from the ladder.
struct ConditionReport {
  std::map<std::string, ConditionEntry> entries;  // A1,A2,A3,A5,C1,C2,C7
  double a_hat = 0;        // empirical essential infimum of alpha_max
  double lambda_hat = 0;   // (A2) fit P(alpha_sec <= x) ~ lambda x^nu
  double nu_hat = 0;
  double a2_r_squared = 0;
  double eta_feasible = 0;  // largest ladder eta satisfying (C4)-(C6)
  std::int64_t n_draws = 0;

  bool all_pass_or_inconclusive() const;
};

ConditionReport audit_coefficients(const EquationSystem& system, int r, std::int64_t n_draws,
                                   SplitRng& rng, const AuditOptions& opts = {});

/// Affine-hull diagnostic for (A4): normalized smallest eigenvalue of the
/// sample covariance (variance over scale^2 for d=1).
struct SupportAudit {
  Verdict verdict = Verdict::kInconclusive;
  double min_eig_ratio = 0;
  std::int64_t n = 0;
  std::string note;
};

SupportAudit audit_support(const SamplePool& pool);

/// Lattice evidence scan: |empirical E exp(2 pi i <s,X>/scale)| over sampled
/// directions and candidate scales. A value near 1 is lattice evidence; a
/// pass is one-sided evidence only, never proof.
struct LatticeAudit {
  Verdict verdict = Verdict::kInconclusive;
  double worst_abs = 0;
  double worst_scale = 0;
  Eigen::VectorXd worst_direction;
  std::string note;
};

LatticeAudit audit_lattice(const SamplePool& pool, int directions, SplitRng& rng);

/// Trace of the decay-exponent bootstrap chi(beta) = beta + min(beta,nu)/2.
struct ChiTrace {
  double eta0 = 0;
  double nu = 0;
  double beta_target = 0;
  std::vector<double> values;  // eta0, chi(eta0), chi^2(eta0), ...
  int steps_to_target = 0;
};

ChiTrace chi_bootstrap(double eta0, double nu, double beta_target);

/// Monte Carlo estimates behind conditions (C4)-(C6) at a given eta.
struct C4C6Estimates {
  double c4_hat = 0;          // winsorized mean of alpha_sec^{-eta} on {alpha_sec>0}
  bool c4_divergent = false;  // top-1% of the raw sum carries more than half
  double c5_exponent = 0;     // lower-decile tail exponent of P(alpha_max <= x)
  double c5_r_squared = 0;
  bool c5_bounded_away = false;  // empirical alpha_max bounded away from 0
  double c6_hat = 0;             // mean of alpha_max^{-eta} on {alpha_sec=0}
  double c6_std_error = 0;
};

C4C6Estimates c4_c6_estimates(const std::vector<SpectralSummary>& draws, double eta);

}  // namespace sfpe
