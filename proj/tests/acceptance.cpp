// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Heavier full-size runs than the unit tests; everything is
// seeded and runs on a laptop.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <span>
#include <vector>

#include "sfpe/audit.hpp"
#include "sfpe/density.hpp"
#include "sfpe/io.hpp"
#include "sfpe/models.hpp"
#include "sfpe/process.hpp"
#include "sfpe/solver.hpp"
#include "sfpe/spectral.hpp"
#include "sfpe/stats.hpp"

using namespace sfpe;

namespace {

int failures = 0;

void report(int criterion, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] %2d %-28s %s\n", pass ? "PASS" : "FAIL", criterion, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

std::vector<double> sorted_pool(const SamplePool& pool) {
  std::vector<double> out(pool.values.data(), pool.values.data() + pool.size());
  std::sort(out.begin(), out.end());
  return out;
}

double pool_variance(const SamplePool& pool) {
  std::span<const double> x(pool.values.data(), static_cast<std::size_t>(pool.size()));
  return variance(x);
}

double brute_force_lp(const std::vector<double>& a, std::vector<double> b, double p) {
  std::vector<std::size_t> idx(b.size());
  std::iota(idx.begin(), idx.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double cost = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
      cost += std::pow(std::abs(a[i] - b[idx[i]]), p);
    best = std::min(best, cost);
  } while (std::next_permutation(idx.begin(), idx.end()));
  return std::pow(best / static_cast<double>(a.size()), 1.0 / p);
}

constexpr double kQuicksortVar = 0.420263732607094;  // 7 - 2 pi^2/3 = 3 E[g^2]
constexpr double kRrtVar = 0.355065933151774;        // 3 E[h^2] by quadrature
constexpr double kGaussPeak = 0.398942280401433;     // 1/sqrt(2 pi)

// ---- criterion 1 + shared quicksort artifacts -----------------------------

SolveResult g_qs_solved;        // N = 2e5, seed 1
SolveResult g_qs_solved_seed2;  // N = 2e5, seed 2

void criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  const EquationSystem sys = build(ModelConfig::quicksort());
  SolveOptions opts;
  opts.max_iters = 60;
  opts.threads = 4;
  g_qs_solved = solve(sys, 200000, 1, opts);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double var = pool_variance(g_qs_solved.pools[0]);
  const double rel = std::abs(var / kQuicksortVar - 1.0);
  report(1, "quicksort variance", rel <= 0.02 && seconds < 60.0,
         fmt("var=%.6f target=%.6f rel=%.4f%% runtime=%.1fs", var, kQuicksortVar, 100 * rel,
             seconds));
  g_qs_solved_seed2 = solve(sys, 200000, 2, opts);
}

// ---- criterion 2 -----------------------------------------------------------

void criterion_2() {
  struct Entry {
    const char* name;
    ModelConfig config;
    double order2_oracle;  // < 0: skip the oracle comparison
  };
  const Eigen::MatrixXi rep3 =
      (Eigen::MatrixXi(3, 3) << 3, 1, 0, 0, 3, 1, 1, 0, 3).finished();
  const std::vector<Entry> zoo = {
      {"quicksort", ModelConfig::quicksort(), kQuicksortVar},
      {"quicksort2d", ModelConfig::quicksort2d(), -1},
      {"rrt", ModelConfig::rrt(), kRrtVar},
      {"urn_det", ModelConfig::urn_det(4, 1, 1, 4), -1},
      {"urn_rand", ModelConfig::urn_rand(0.9, 0.8), -1},
      {"urn_multi", ModelConfig::urn_multi(rep3, {2.5, std::sqrt(3.0) / 2}), -1},
      {"split", ModelConfig::split(SplitVectorLaw::binary_uniform()), kQuicksortVar},
      {"split2d", ModelConfig::split2d(SplitVectorLaw::binary_uniform()), -1},
  };

  bool all_ok = true;
  std::string detail;
  for (const auto& entry : zoo) {
    const EquationSystem sys = build(entry.config);
    // the order-2 oracle models run at full size; the rest only need the
    // order-1 identity, which holds at any pinned pool state
    const bool full = entry.order2_oracle > 0;
    SolveOptions opts;
    opts.max_iters = full ? 60 : 40;
    opts.threads = 4;
    opts.sliced_directions = 16;
    const std::int64_t n_pool = full ? 100000 : 50000;
    const SolveResult solved = solve(sys, n_pool, 7, opts);
    SplitRng rng(17);
    const auto order1 = moment_residual(sys, solved.pools, 1, 50000, rng);
    for (int r = 0; r < sys.m(); ++r) {
      const auto& res = order1[static_cast<std::size_t>(r)];
      for (int k = 0; k < sys.d(); ++k) {
        if (std::abs(res.value(k, 0)) > 4 * res.std_error(k, 0)) {
          all_ok = false;
          detail += fmt("%s[eq%d,%d] o1=%.2e>4SE ", entry.name, r, k, res.value(k, 0));
        }
      }
    }
    if (entry.order2_oracle > 0) {
      const auto order2 = moment_residual(sys, solved.pools, 2, 100000, rng);
      const auto& res = order2[0];
      if (std::abs(res.value(0, 0)) > 4 * res.std_error(0, 0)) {
        all_ok = false;
        detail += fmt("%s o2 resid ", entry.name);
      }
      // pool second moment against the quadrature oracle
      const SamplePool& pool = solved.pools[0];
      const double m2 = pool_variance(pool);
      std::vector<double> sq(static_cast<std::size_t>(pool.size()));
      for (Eigen::Index i = 0; i < pool.size(); ++i)
        sq[static_cast<std::size_t>(i)] = pool.values(0, i) * pool.values(0, i);
      const double se = sd_sample(sq) / std::sqrt(static_cast<double>(pool.size()));
      if (std::abs(m2 - entry.order2_oracle) > 4 * se) {
        all_ok = false;
        detail += fmt("%s m2=%.5f vs %.5f (4SE=%.5f) ", entry.name, m2, entry.order2_oracle,
                      4 * se);
      }
    }
  }
  if (all_ok) detail = "8 models, order-1 all <= 4SE; 3 order-2 oracles hit";
  report(2, "moment residuals", all_ok, detail);
}

// ---- criterion 3 -----------------------------------------------------------

void criterion_3() {
  SplitRng rng(23);
  bool ok = true;
  double worst = 0;
  for (int i = 0; i < 10000 && ok; ++i) {
    const double v = rng.uniform_open();
    Eigen::Matrix2d a;
    a << v * v, v * (1 - v), 0, v;
    const double lo = min_gain(a), hi = op_norm(a);
    const double root = std::sqrt(1 + v * v);
    const double lo_closed = v * std::sqrt(1 - v * (1 - v) - (1 - v) * root);
    const double hi_closed = v * std::sqrt(1 - v * (1 - v) + (1 - v) * root);
    worst = std::max({worst, std::abs(lo - lo_closed), std::abs(hi - hi_closed)});
    ok = ok && std::abs(lo - lo_closed) <= 1e-10 && std::abs(hi - hi_closed) <= 1e-10;
    ok = ok && std::pow(v, 2.5) <= lo + 1e-12 && lo <= hi && hi <= std::sqrt(v) + 1e-12;
  }
  report(3, "split2d closed forms", ok, fmt("10^4 draws, worst gap %.2e, sandwich held", worst));
}

// ---- criterion 4 -----------------------------------------------------------

void criterion_4() {
  const EquationSystem qs = build(ModelConfig::quicksort());
  SplitRng rng(29);
  const ConditionReport rep = audit_coefficients(qs, 0, 100000, rng);
  const double eps_n = 5e-4;
  bool ok = rep.a_hat >= 0.5 && rep.a_hat <= 0.5 + eps_n;
  ok = ok && std::abs(rep.lambda_hat / 2.0 - 1) <= 0.10 && std::abs(rep.nu_hat - 1.0) <= 0.10;
  std::string detail = fmt("a_hat=%.6f lam=%.3f nu=%.3f", rep.a_hat, rep.lambda_hat, rep.nu_hat);

  // single-term perpetuity: (A2) fails and (C6) fails
  EquationSystem::Sampler sampler = [](SplitRng&) {
    RawDraw d;
    d.matrices = {Eigen::MatrixXd::Identity(1, 1)};
    d.shift = Eigen::VectorXd::Zero(1);
    return d;
  };
  const EquationSystem perp(1, 1, {[](int) { return 0; }}, {sampler});
  SplitRng rng2(30);
  const ConditionReport prep = audit_coefficients(perp, 0, 2000, rng2);
  std::vector<SpectralSummary> sums;
  for (int i = 0; i < 2000; ++i) {
    SplitRng r = rng2.fork(static_cast<std::uint64_t>(i));
    sums.push_back(spectral_summary(sample_draw(perp, 0, r), Interval::open(0, 1)));
  }
  const C4C6Estimates est = c4_c6_estimates(sums, 0.5);
  ok = ok && prep.entries.at("A2").verdict == Verdict::kFail && est.c6_hat >= 1.0;
  detail += fmt("; perpetuity A2=%s c6=%.2f", to_string(prep.entries.at("A2").verdict),
                est.c6_hat);

  // degenerate split2d fails the support audit, the generic variant passes
  SolveOptions small;
  small.max_iters = 40;
  small.threads = 4;
  small.sliced_directions = 16;
  const EquationSystem degen =
      degenerate_variant(ModelConfig::split2d(SplitVectorLaw::deterministic({0.5, 0.5})));
  const SolveResult dsol = solve(degen, 20000, 3, small);
  const SupportAudit dsup = audit_support(dsol.pools[0]);
  const EquationSystem generic = build(ModelConfig::split2d(SplitVectorLaw::binary_uniform()));
  const SolveResult gsol = solve(generic, 50000, 3, small);
  const SupportAudit gsup = audit_support(gsol.pools[0]);
  ok = ok && dsup.verdict == Verdict::kFail && dsup.min_eig_ratio < 1e-10;
  ok = ok && gsup.verdict == Verdict::kPass && gsup.min_eig_ratio > 1e-3;
  detail += fmt("; support degen=%.1e generic=%.3f", dsup.min_eig_ratio, gsup.min_eig_ratio);
  report(4, "condition audit truths", ok, detail);
}

// ---- criterion 5 -----------------------------------------------------------

void criterion_5() {
  const ChiTrace t = chi_bootstrap(0.5, 1.0, 3.0);
  const std::vector<double> expected{0.5, 0.75, 1.125, 1.625, 2.125, 2.625, 3.125};
  const bool ok = t.values == expected && t.steps_to_target == 6;
  report(5, "chi bootstrap trace", ok, fmt("steps=%d trace matches exactly", t.steps_to_target));
}

// ---- criterion 6 + shared quicksort density --------------------------------

DensityGrid g_qs_density;  // fourier inversion of the seed-1 pool

void criterion_6() {
  // analytic gaussian CF inversion
  CharFunGrid gauss;
  GridAxis ax;
  ax.n = 4096;
  ax.step = 40.0 / 4096;
  ax.min = -ax.step * 2048;
  gauss.axes = {ax};
  gauss.values.resize(ax.n);
  for (int i = 0; i < ax.n; ++i) {
    const double t = ax.at(i);
    gauss.values(i) = std::exp(-0.5 * t * t);
  }
  gauss.n_samples = 1 << 30;
  const DensityGrid gf = invert(gauss, Taper::kNone);
  const double peak_err = std::abs(gf.values.maxCoeff() - kGaussPeak);
  bool ok = peak_err <= 1e-3;
  std::string detail = fmt("gauss peak err=%.1e", peak_err);

  // quicksort inversion (both seeds) and the KDE cross-check
  const auto axes = auto_frequency_axes(g_qs_solved.pools[0]);
  g_qs_density = invert(ecf(g_qs_solved.pools[0], axes, 4), Taper::kHann);
  const auto axes2 = auto_frequency_axes(g_qs_solved_seed2.pools[0]);
  const DensityGrid f2 = invert(ecf(g_qs_solved_seed2.pools[0], axes2, 4), Taper::kHann);

  const double mass = g_qs_density.total_mass();
  const double neg = g_qs_density.values.minCoeff();
  const double peak1 = g_qs_density.values.maxCoeff();
  const double peak2 = f2.values.maxCoeff();
  ok = ok && std::abs(mass - 1.0) <= 0.02;
  ok = ok && neg >= -0.02 * peak1;
  ok = ok && std::abs(peak1 - peak2) / peak1 <= 0.03;
  detail += fmt(" mass=%.4f neg=%.1e peaks %.4f/%.4f", mass, neg, peak1, peak2);

  // KDE vs inversion L1 on [-2, 4]
  GridAxis kx;
  kx.min = -2;
  kx.n = 512;
  kx.step = 6.0 / (kx.n - 1);
  const DensityGrid fk = kde(g_qs_solved.pools[0], 0.0, {kx}, 4);
  double l1 = 0;
  for (int i = 0; i < kx.n; ++i) {
    const double x = kx.at(i);
    const int j = static_cast<int>(std::lround((x - g_qs_density.axes[0].min) /
                                               g_qs_density.axes[0].step));
    l1 += std::abs(fk.values(i) - g_qs_density.values(j)) * kx.step;
  }
  ok = ok && l1 <= 0.05;
  detail += fmt(" kde-L1=%.4f", l1);
  report(6, "density machinery", ok, detail);
}

// ---- criterion 7 -----------------------------------------------------------

void criterion_7() {
  // uniform(-1,1) pool: envelope exponent 1 +- 0.15
  SamplePool unif;
  unif.values.resize(1, 100000);
  SplitRng rng(31);
  for (int i = 0; i < 100000; ++i) unif.values(0, i) = 2 * rng.uniform() - 1;
  const auto uaxes = auto_frequency_axes(unif);
  const DecayFit ufit = decay_fit(ecf(unif, uaxes, 4));
  bool ok = !ufit.inconclusive && std::abs(ufit.beta_hat - 1.0) <= 0.15;
  std::string detail = fmt("uniform beta=%.3f", ufit.beta_hat);

  // quicksort pool: beta >= 2 on the above-noise window; the slope
  // magnitude is non-decreasing as the window's lower edge doubles
  const auto qaxes = auto_frequency_axes(g_qs_solved.pools[0]);
  const CharFunGrid qcf = ecf(g_qs_solved.pools[0], qaxes, 4);
  const DecayFit base = decay_fit(qcf);
  ok = ok && !base.inconclusive && base.beta_hat >= 2.0;
  detail += fmt(" qs beta=[%.2f", base.beta_hat);
  double prev = base.beta_hat;
  int windows = 1;
  for (double lo = 2 * base.window_lo; windows < 4; lo *= 2) {
    const DecayFit fit = decay_fit(qcf, lo);
    if (fit.inconclusive) break;
    detail += fmt(", %.2f", fit.beta_hat);
    ok = ok && fit.beta_hat >= prev - 1e-12;
    prev = fit.beta_hat;
    ++windows;
  }
  detail += "]";
  ok = ok && windows >= 2;
  report(7, "tail decay", ok, detail);
}

// ---- criterion 8 -----------------------------------------------------------

void criterion_8() {
  SplitRng rng(37);
  const Eigen::MatrixXd batch =
      scaled_batch(ProcessConfig::quicksort_cmp(), 10000, 10000, rng, true, 4);
  std::vector<double> sims(batch.data(), batch.data() + batch.cols());
  std::sort(sims.begin(), sims.end());
  const std::vector<double> pool = sorted_pool(g_qs_solved.pools[0]);
  const double ks = ks_statistic(pool, sims);

  // l1 via quantile thinning of the pool to the simulation size
  std::vector<double> thin(sims.size());
  for (std::size_t i = 0; i < thin.size(); ++i)
    thin[i] = pool[i * pool.size() / thin.size() + pool.size() / (2 * thin.size())];
  const double l1 = wasserstein_1d(thin, sims, 1);
  const double f_sup = g_qs_density.values.maxCoeff();
  const double bound = ks_rate_bound(l1, f_sup, 1);
  const bool ok = ks <= 0.03 && bound > ks;
  report(8, "end-to-end convergence", ok,
         fmt("ks=%.4f l1=%.4f f_sup=%.3f bound=%.4f", ks, l1, f_sup, bound));
}

// ---- criterion 9 -----------------------------------------------------------

void criterion_9() {
  SplitRng rng(41);
  bool ok = true;

  // exact equality with the brute-force coupling for all n <= 6
  for (int trial = 0; trial < 200 && ok; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(6);
    const double p = 1 + static_cast<double>(rng.uniform_index(3));
    std::vector<double> a(n), b(n);
    for (auto& v : a) v = 10 * rng.uniform() - 5;
    for (auto& v : b) v = 10 * rng.uniform() - 5;
    const double oracle = brute_force_lp(a, b, p);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    ok = ok && std::abs(wasserstein_1d(a, b, p) - oracle) <= 1e-12 * std::max(1.0, oracle);
  }
  std::string detail = ok ? "coupling oracle exact on 200 cases" : "coupling oracle mismatch";

  // quicksort comparisons at n = 3: mean 8/3 within 3 SE
  const int runs = 100000;
  double acc = 0;
  for (int i = 0; i < runs; ++i) {
    SplitRng r = rng.fork(static_cast<std::uint64_t>(i));
    acc += run(ProcessConfig::quicksort_cmp(), 3, r).statistic[0];
  }
  const double se = std::sqrt(2.0 / 9.0 / runs);
  const double gap = std::abs(acc / runs - 8.0 / 3.0);
  ok = ok && gap <= 3 * se;
  detail += fmt("; qs3 mean gap=%.5f (3SE=%.5f)", gap, 3 * se);

  // rrt n = 3: scaled support exactly {-1/6, +1/6}
  bool support_ok = true;
  for (int i = 0; i < 2000; ++i) {
    SplitRng r = rng.fork(1000000 + static_cast<std::uint64_t>(i));
    const double s = run(ProcessConfig::rrt_pathlen(), 3, r).scaled[0];
    support_ok = support_ok && (s == -1.0 / 6 || s == 1.0 / 6 ||
                                std::abs(std::abs(s) - 1.0 / 6) < 1e-15);
  }
  ok = ok && support_ok;
  detail += support_ok ? "; rrt3 support exact" : "; rrt3 support wrong";
  report(9, "exact small-instance oracles", ok, detail);
}

// ---- criterion 10 ----------------------------------------------------------

void criterion_10() {
  namespace fs = std::filesystem;
  const EquationSystem sys = build(ModelConfig::quicksort());
  bool ok = true;
  std::string detail;

  std::vector<SolveResult> runs;
  for (int threads : {1, 4, 8}) {
    SolveOptions opts;
    opts.max_iters = 12;
    opts.threads = threads;
    runs.push_back(solve(sys, 30000, 99, opts));
  }
  ok = ok && runs[0].pools[0].values == runs[1].pools[0].values &&
       runs[0].pools[0].values == runs[2].pools[0].values;
  detail += ok ? "pools identical" : "pools differ";

  // byte-identical serialized pools
  const fs::path dir = fs::temp_directory_path() / "sfpe_acceptance";
  fs::create_directories(dir);
  write_pools(dir / "t1.bin", runs[0].pools);
  write_pools(dir / "t8.bin", runs[2].pools);
  ok = ok && sha256_file(dir / "t1.bin") == sha256_file(dir / "t8.bin");

  // grids across thread counts
  const auto axes = auto_frequency_axes(runs[0].pools[0], 2048);
  const CharFunGrid cf1 = ecf(runs[0].pools[0], axes, 1);
  const CharFunGrid cf8 = ecf(runs[0].pools[0], axes, 8);
  const bool grids_ok = cf1.values == cf8.values;
  ok = ok && grids_ok;
  detail += grids_ok ? ", grids identical" : ", grids differ";

  const DensityGrid k1 = kde(runs[0].pools[0], 0.0, {GridAxis{-2, 0.01, 500}}, 1);
  const DensityGrid k8 = kde(runs[0].pools[0], 0.0, {GridAxis{-2, 0.01, 500}}, 8);
  ok = ok && k1.values == k8.values;

  // audit reports across thread counts
  AuditOptions a1, a8;
  a8.threads = 8;
  SplitRng r1(7), r8(7);
  const std::string rep1 = to_json(audit_coefficients(sys, 0, 20000, r1, a1)).dump();
  const std::string rep8 = to_json(audit_coefficients(sys, 0, 20000, r8, a8)).dump();
  const bool reports_ok = rep1 == rep8;
  ok = ok && reports_ok;
  detail += reports_ok ? ", reports identical" : ", reports differ";
  report(10, "determinism across threads", ok, detail);
}

}  // namespace

int main() {
  std::printf("acceptance suite, version %s\n", "0.1.0");
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10();
  std::printf("%s: %d/10 criteria passed\n", failures == 0 ? "OK" : "FAILED", 10 - failures);
  return failures == 0 ? 0 : 1;
}
