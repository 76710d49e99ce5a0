#include <doctest.h>

#include <cmath>

#include "sfpe/audit.hpp"
#include "sfpe/models.hpp"
#include "sfpe/solver.hpp"

using namespace sfpe;

namespace {

EquationSystem perpetuity_system() {
  // single-term deterministic system A = [[1]], b = 0
  EquationSystem::Sampler sampler = [](SplitRng&) {
    RawDraw d;
    d.matrices = {Eigen::MatrixXd::Identity(1, 1)};
    d.shift = Eigen::VectorXd::Zero(1);
    return d;
  };
  return EquationSystem(1, 1, {[](int) { return 0; }}, {sampler});
}

std::vector<SpectralSummary> draw_summaries(const EquationSystem& sys, int r, int n,
                                            std::uint64_t seed) {
  std::vector<SpectralSummary> out;
  SplitRng rng(seed);
  const Interval open01 = Interval::open(0, 1);
  for (int i = 0; i < n; ++i) {
    SplitRng draw_rng = rng.fork(static_cast<std::uint64_t>(i));
    out.push_back(spectral_summary(sample_draw(sys, r, draw_rng), open01));
  }
  return out;
}

}  // namespace

TEST_CASE("chi_bootstrap traces") {
  const ChiTrace t = chi_bootstrap(0.5, 1.0, 3.0);
  const std::vector<double> expected{0.5, 0.75, 1.125, 1.625, 2.125, 2.625, 3.125};
  CHECK(t.values == expected);  // dyadic values, exact in binary
  CHECK(t.steps_to_target == 6);

  CHECK(chi_bootstrap(1, 1, 1).steps_to_target == 0);
  CHECK(chi_bootstrap(1, 2, 1.5).values[1] == 1.5);  // beta < nu branch

  CHECK_THROWS_AS(chi_bootstrap(0, 1, 1), std::domain_error);
  CHECK_THROWS_AS(chi_bootstrap(1, -1, 1), std::domain_error);
}

TEST_CASE("chi_bootstrap increments are min(beta,nu)/2 and strictly increasing") {
  SplitRng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const double eta0 = 0.05 + rng.uniform();
    const double nu = 0.05 + 2 * rng.uniform();
    const double target = eta0 + 5 * rng.uniform();
    const ChiTrace t = chi_bootstrap(eta0, nu, target);
    for (std::size_t i = 1; i < t.values.size(); ++i) {
      const double inc = t.values[i] - t.values[i - 1];
      CHECK(t.values[i] > t.values[i - 1]);
      CHECK(inc == doctest::Approx(std::min(t.values[i - 1], nu) / 2).epsilon(1e-12));
    }
    CHECK(t.values.back() >= target);
  }
}

TEST_CASE("audit_coefficients: quicksort truths") {
  const EquationSystem sys = build(ModelConfig::quicksort());
  SplitRng rng(77);
  const ConditionReport rep = audit_coefficients(sys, 0, 100000, rng);

  // a_hat -> 1/2 from above; exact law P(alpha_sec <= x) = 2x
  CHECK(rep.a_hat >= 0.5);
  CHECK(rep.a_hat <= 0.5 + 5e-4);
  CHECK(rep.nu_hat == doctest::Approx(1.0).epsilon(0.1));
  CHECK(rep.lambda_hat == doctest::Approx(2.0).epsilon(0.1));
  CHECK(rep.a2_r_squared > 0.95);

  CHECK(rep.entries.at("A1").verdict == Verdict::kPass);
  CHECK(rep.entries.at("A2").verdict == Verdict::kPass);
  CHECK(rep.entries.at("A3").verdict == Verdict::kPass);
  CHECK(rep.entries.at("A5").verdict == Verdict::kPass);
  CHECK(rep.entries.at("C1").verdict == Verdict::kPass);
  CHECK(rep.entries.at("C2").verdict == Verdict::kPass);
  CHECK(rep.entries.at("C2").estimate == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(rep.all_pass_or_inconclusive());
  CHECK(rep.eta_feasible >= 0.5);

  CHECK_THROWS_AS(audit_coefficients(sys, 0, 100, rng), std::domain_error);
}

TEST_CASE("audit_coefficients: perpetuity fails (A2), not an exception") {
  const EquationSystem sys = perpetuity_system();
  SplitRng rng(78);
  const ConditionReport rep = audit_coefficients(sys, 0, 2000, rng);
  CHECK(rep.entries.at("A2").verdict == Verdict::kFail);
  CHECK_FALSE(rep.all_pass_or_inconclusive());
}

TEST_CASE("audit_coefficients: identical seeds give identical reports") {
  const EquationSystem sys = build(ModelConfig::quicksort());
  SplitRng rng1(9), rng2(9);
  const ConditionReport a = audit_coefficients(sys, 0, 2000, rng1);
  const ConditionReport b = audit_coefficients(sys, 0, 2000, rng2);
  CHECK(a.a_hat == b.a_hat);
  CHECK(a.nu_hat == b.nu_hat);
}

TEST_CASE("c4_c6_estimates: quicksort quadrature value at eta = 1/2") {
  const EquationSystem sys = build(ModelConfig::quicksort());
  const auto sums = draw_summaries(sys, 0, 100000, 31);
  const C4C6Estimates est = c4_c6_estimates(sums, 0.5);
  // E[min(U,1-U)^{-1/2}] = 2.828427 by quadrature; the winsorized
  // estimate sits slightly below
  CHECK(est.c4_hat == doctest::Approx(2.8284271247).epsilon(0.03));
  CHECK_FALSE(est.c4_divergent);
  CHECK(est.c6_hat == 0);  // alpha_sec > 0 a.s.
  CHECK(est.c5_bounded_away);

  // past eta = 1 the integrand diverges; the flag fires
  const C4C6Estimates div = c4_c6_estimates(sums, 1.5);
  CHECK(div.c4_divergent);
}

TEST_CASE("c4_c6_estimates: single-term deterministic draws give c6 = 1") {
  const EquationSystem sys = perpetuity_system();
  const auto sums = draw_summaries(sys, 0, 1000, 32);
  const C4C6Estimates est = c4_c6_estimates(sums, 0.7);
  CHECK(est.c6_hat == doctest::Approx(1.0));  // (C6) fails: not < 1
}

TEST_CASE("(A2) pass implies c6_hat = 0 on the same draws") {
  for (auto config : {ModelConfig::quicksort(), ModelConfig::rrt(),
                      ModelConfig::split(SplitVectorLaw::binary_uniform())}) {
    const EquationSystem sys = build(config);
    SplitRng rng(41);
    const ConditionReport rep = audit_coefficients(sys, 0, 5000, rng);
    const auto sums = draw_summaries(sys, 0, 5000, 41);
    const C4C6Estimates est = c4_c6_estimates(sums, 0.5);
    if (rep.entries.at("A2").verdict == Verdict::kPass) CHECK(est.c6_hat == 0);
  }
}

TEST_CASE("audit_support: rank and degeneracy") {
  SplitRng rng(51);

  // line y = x in R^2 fails
  SamplePool line;
  line.values.resize(2, 5000);
  for (int i = 0; i < 5000; ++i) {
    const double v = rng.normal();
    line.values(0, i) = v;
    line.values(1, i) = v;
  }
  CHECK(audit_support(line).verdict == Verdict::kFail);

  // isotropic gaussian passes
  SamplePool iso;
  iso.values.resize(2, 5000);
  for (Eigen::Index i = 0; i < iso.values.size(); ++i) iso.values(i) = rng.normal();
  const SupportAudit good = audit_support(iso);
  CHECK(good.verdict == Verdict::kPass);
  CHECK(good.min_eig_ratio > 1e-3);

  // 1d: constant pool fails, spread pool passes
  SamplePool constant;
  constant.values = Eigen::MatrixXd::Constant(1, 2000, 3.0);
  CHECK(audit_support(constant).verdict == Verdict::kFail);
  SamplePool spread;
  spread.values.resize(1, 2000);
  for (int i = 0; i < 2000; ++i) spread.values(0, i) = rng.uniform();
  CHECK(audit_support(spread).verdict == Verdict::kPass);

  // tiny pool is inconclusive
  SamplePool tiny;
  tiny.values = Eigen::MatrixXd::Zero(2, 2);
  CHECK(audit_support(tiny).verdict == Verdict::kInconclusive);
}

TEST_CASE("audit_support is invariant under well-conditioned affine maps") {
  SplitRng rng(52);
  SamplePool base;
  base.values.resize(2, 4000);
  for (Eigen::Index i = 0; i < base.values.size(); ++i) base.values(i) = rng.normal();
  REQUIRE(audit_support(base).verdict == Verdict::kPass);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::Matrix2d a;
    double cond = 1e9;
    do {
      for (int k = 0; k < 4; ++k) a(k / 2, k % 2) = 2 * rng.uniform() - 1;
      Eigen::JacobiSVD<Eigen::Matrix2d> svd(a);
      cond = svd.singularValues()(0) / svd.singularValues()(1);
    } while (!(cond < 1e3));
    Eigen::Vector2d shift(rng.normal(), rng.normal());
    SamplePool mapped = base;
    mapped.values = (a * base.values).colwise() + shift;
    CHECK(audit_support(mapped).verdict == Verdict::kPass);
  }
}

TEST_CASE("audit_lattice: integer support fails, continuous passes") {
  SplitRng rng(53);

  SamplePool coin;
  coin.values.resize(1, 4000);
  for (int i = 0; i < 4000; ++i) coin.values(0, i) = rng.uniform() < 0.5 ? 0.0 : 1.0;
  SplitRng r1(1);
  const LatticeAudit bad = audit_lattice(coin, 8, r1);
  CHECK(bad.verdict == Verdict::kFail);
  CHECK(bad.worst_abs > 0.999);
  CHECK(bad.worst_scale == doctest::Approx(1.0).epsilon(1e-6));

  SamplePool unif;
  unif.values.resize(1, 4000);
  for (int i = 0; i < 4000; ++i) unif.values(0, i) = rng.uniform();
  SplitRng r2(2);
  CHECK(audit_lattice(unif, 8, r2).verdict == Verdict::kPass);

  SamplePool constant;
  constant.values = Eigen::MatrixXd::Constant(1, 2000, 0.7);
  SplitRng r3(3);
  CHECK(audit_lattice(constant, 8, r3).verdict == Verdict::kFail);

  SamplePool small;
  small.values = Eigen::MatrixXd::Zero(1, 10);
  SplitRng r4(4);
  CHECK_THROWS_AS(audit_lattice(small, 8, r4), std::domain_error);
}
