#include "sfpe/audit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sfpe/parallel.hpp"
#include "sfpe/stats.hpp"

namespace sfpe {

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::kPass: return "pass";
    case Verdict::kFail: return "fail";
    default: return "inconclusive";
  }
}

bool ConditionReport::all_pass_or_inconclusive() const {
  for (const auto& [name, e] : entries)
    if (e.verdict == Verdict::kFail) return false;
  return true;
}

namespace {

// log-log least squares of the empirical CDF on the lower decile
LinearFit lower_decile_tail_fit(std::vector<double> sorted_positive) {
  LinearFit fit;
  const std::size_t k = sorted_positive.size() / 10;
  if (k < 8) return fit;
  std::vector<double> lx, ly;
  lx.reserve(k);
  ly.reserve(k);
  const auto n = static_cast<double>(sorted_positive.size());
  for (std::size_t i = 0; i < k; ++i) {
    if (sorted_positive[i] <= 0) continue;
    lx.push_back(std::log(sorted_positive[i]));
    ly.push_back(std::log(static_cast<double>(i + 1) / n));
  }
  return fit_line(lx, ly);
}

}  // namespace

ConditionReport audit_coefficients(const EquationSystem& system, int r, std::int64_t n_draws,
                                   SplitRng& rng, const AuditOptions& opts) {
  if (n_draws < 1000) throw std::domain_error("audit_coefficients: need n_draws >= 1000");
  if (r < 0 || r >= system.m()) throw std::domain_error("audit_coefficients: bad equation index");

  const Interval open01 = Interval::open(0, 1);
  const Interval half01 = Interval::open_closed(0, 1);

  std::vector<SpectralSummary> sums(static_cast<std::size_t>(n_draws));
  std::vector<double> n_half(static_cast<std::size_t>(n_draws));
  std::vector<double> opmax(static_cast<std::size_t>(n_draws));
  std::vector<double> c7vals(static_cast<std::size_t>(n_draws));
  const SplitRng base = rng.fork(0x61756474);
  parallel_for(n_draws, opts.threads, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t i = begin; i < end; ++i) {
      SplitRng draw_rng = base.fork(static_cast<std::uint64_t>(i));
      CoefficientDraw draw = sample_draw(system, r, draw_rng);
      sums[static_cast<std::size_t>(i)] = spectral_summary(draw, open01);
      SpectralSummary h = spectral_summary(draw, half01);
      n_half[static_cast<std::size_t>(i)] = h.n_interval;
      double om = 0;
      double prod = 1;
      for (std::size_t j = 0; j < draw.opnorms.size(); ++j) {
        om = std::max(om, draw.opnorms[j]);
        prod *= std::min(1.0, std::pow(draw.alphas[j] * opts.c7_x, -opts.c7_beta));
      }
      opmax[static_cast<std::size_t>(i)] = om;
      c7vals[static_cast<std::size_t>(i)] = prod;
    }
  });

  ConditionReport report;
  report.n_draws = n_draws;
  const auto nd = static_cast<double>(n_draws);

  std::vector<double> amax, asec;
  amax.reserve(sums.size());
  asec.reserve(sums.size());
  std::int64_t n_interval_hits = 0;  // draws with N_r((0,1)) >= 1
  std::int64_t asec_zero = 0;
  for (const auto& s : sums) {
    amax.push_back(s.alpha_max);
    asec.push_back(s.alpha_sec);
    if (s.n_interval >= 1) ++n_interval_hits;
    if (s.alpha_sec == 0) ++asec_zero;
  }

  // (A1) essential infimum of alpha_max, estimated by the sample minimum
  report.a_hat = *std::min_element(amax.begin(), amax.end());
  {
    ConditionEntry e;
    e.estimate = report.a_hat;
    e.n = n_draws;
    e.verdict = report.a_hat >= opts.a1_floor ? Verdict::kPass : Verdict::kFail;
    e.note = "empirical min of alpha_max; floor " + std::to_string(opts.a1_floor);
    report.entries["A1"] = e;
  }

  // (A2) P(alpha_sec <= x) ~ lambda x^nu on the lower decile
  {
    ConditionEntry e;
    e.n = n_draws;
    if (asec_zero > 0) {
      e.verdict = Verdict::kFail;
      e.estimate = static_cast<double>(asec_zero) / nd;
      e.note = "alpha_sec has an atom at 0";
    } else {
      std::vector<double> sorted = asec;
      std::sort(sorted.begin(), sorted.end());
      LinearFit fit = lower_decile_tail_fit(std::move(sorted));
      report.nu_hat = fit.slope;
      report.lambda_hat = std::exp(fit.intercept);
      report.a2_r_squared = fit.r_squared;
      e.estimate = fit.slope;
      e.verdict = (fit.n >= 8 && fit.slope > 0 && fit.r_squared >= opts.a2_r2_min)
                      ? Verdict::kPass
                      : Verdict::kFail;
      e.note = "log-log CDF fit on lower decile; r^2 = " + std::to_string(fit.r_squared);
    }
    report.entries["A2"] = e;
  }

  // (A3) all operator norms at most 1
  {
    ConditionEntry e;
    e.estimate = *std::max_element(opmax.begin(), opmax.end());
    e.n = n_draws;
    e.verdict = e.estimate <= 1.0 + 1e-12 ? Verdict::kPass : Verdict::kFail;
    e.note = "max observed op norm";
    report.entries["A3"] = e;
  }

  // (A5) P(N_r((0,1)) >= 1) > 0 with a Wilson lower bound
  {
    ConditionEntry e;
    e.estimate = static_cast<double>(n_interval_hits) / nd;
    e.std_error = std::sqrt(e.estimate * (1 - e.estimate) / nd);
    e.n = n_draws;
    const double lower = wilson_lower(n_interval_hits, n_draws, opts.z);
    e.verdict = lower > 0 ? Verdict::kPass : Verdict::kFail;
    e.note = "freq of N_r((0,1)) >= 1; Wilson lower bound " + std::to_string(lower);
    report.entries["A5"] = e;
  }

  // (C1) alpha_max > 0 almost surely
  {
    ConditionEntry e;
    std::int64_t zeros = std::count(amax.begin(), amax.end(), 0.0);
    e.estimate = static_cast<double>(zeros) / nd;
    e.n = n_draws;
    e.verdict = zeros == 0 ? Verdict::kPass : Verdict::kFail;
    e.note = "fraction of draws with alpha_max = 0";
    report.entries["C1"] = e;
  }

  // (C2) E[N_r((0,1])] > 1
  {
    ConditionEntry e;
    e.estimate = mean(n_half);
    e.std_error = sd_sample(n_half) / std::sqrt(nd);
    e.n = n_draws;
    e.verdict = e.estimate - opts.z * e.std_error > 1 ? Verdict::kPass : Verdict::kFail;
    e.note = "E[N_r((0,1])] with normal lower bound";
    report.entries["C2"] = e;
  }

  // (C7) product moment at caller-chosen (beta, x); reported, not gated
  {
    ConditionEntry e;
    e.estimate = mean(c7vals);
    e.std_error = sd_sample(c7vals) / std::sqrt(nd);
    e.n = n_draws;
    e.verdict = Verdict::kInconclusive;
    e.note = "E[prod_j ((alpha_j x)^-beta ^ 1)] at beta=" + std::to_string(opts.c7_beta) +
             ", x=" + std::to_string(opts.c7_x);
    report.entries["C7"] = e;
  }

  // feasible eta ladder for (C4)-(C6)
  for (double eta : opts.eta_ladder) {
    C4C6Estimates est = c4_c6_estimates(sums, eta);
    const bool c4_ok = !est.c4_divergent;
    const bool c5_ok = est.c5_bounded_away || est.c5_exponent >= 0.9 * eta;
    const bool c6_ok = est.c6_hat + opts.z * est.c6_std_error < 1;
    if (c4_ok && c5_ok && c6_ok) report.eta_feasible = std::max(report.eta_feasible, eta);
  }

  return report;
}

SupportAudit audit_support(const SamplePool& pool) {
  SupportAudit audit;
  audit.n = pool.size();
  if (pool.size() == 0) throw std::domain_error("audit_support: empty pool");
  if (pool.size() < pool.dim() + 1) {
    audit.verdict = Verdict::kInconclusive;
    audit.note = "pool smaller than d+1";
    return audit;
  }
  if (pool.dim() == 1) {
    const double* data = pool.values.data();
    std::span<const double> x(data, static_cast<std::size_t>(pool.size()));
    double scale = 0;
    for (double v : x) scale = std::max(scale, std::abs(v));
    const double var = variance(x);
    audit.min_eig_ratio = scale > 0 ? var / (scale * scale) : 0.0;
  } else {
    Eigen::MatrixXd cov = pool.covariance();
    const double tr = cov.trace();
    if (tr <= 0) {
      audit.min_eig_ratio = 0;
    } else {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
      audit.min_eig_ratio = std::max(0.0, es.eigenvalues().minCoeff()) / tr;
    }
  }
  audit.verdict = audit.min_eig_ratio >= 1e-6 ? Verdict::kPass : Verdict::kFail;
  audit.note = "normalized smallest covariance eigenvalue";
  return audit;
}

namespace {

// approximate positive gcd of gaps, Euclid with an absolute tolerance
double approx_gcd(const std::vector<double>& gaps, double tol) {
  double g = 0;
  for (double v : gaps) {
    double a = std::max(g, v), b = std::min(g, v);
    while (b > tol) {
      const double t = std::fmod(a, b);
      a = b;
      b = t;
    }
    g = a;
  }
  return g;
}

double abs_ecf_at(std::span<const double> proj, double freq) {
  double re = 0, im = 0;
  for (double x : proj) {
    re += std::cos(freq * x);
    im += std::sin(freq * x);
  }
  const auto n = static_cast<double>(proj.size());
  return std::hypot(re / n, im / n);
}

}  // namespace

LatticeAudit audit_lattice(const SamplePool& pool, int directions, SplitRng& rng) {
  if (pool.size() < 1000) throw std::domain_error("audit_lattice: need pool size >= 1000");
  LatticeAudit audit;
  audit.note = "one-sided evidence only; a pass does not prove non-lattice";
  const int d = pool.dim();
  const int n_dirs = d == 1 ? 1 : std::max(1, directions);
  const auto n = pool.size();
  std::vector<double> proj(static_cast<std::size_t>(n));

  constexpr double kLatticeThreshold = 1.0 - 1e-3;
  for (int k = 0; k < n_dirs; ++k) {
    Eigen::VectorXd dir = Eigen::VectorXd::Zero(d);
    if (d == 1) {
      dir(0) = 1;
    } else {
      do {
        for (int i = 0; i < d; ++i) dir(i) = rng.normal();
      } while (dir.norm() == 0);
      dir.normalize();
    }
    Eigen::Map<Eigen::VectorXd>(proj.data(), n) = pool.values.transpose() * dir;

    const double sigma = std::sqrt(variance(proj));
    if (sigma == 0) {
      audit.verdict = Verdict::kFail;
      audit.worst_abs = 1.0;
      audit.worst_scale = 0;
      audit.worst_direction = dir;
      audit.note = "degenerate projection (point mass)";
      return audit;
    }

    std::vector<double> scales;
    for (int s = 0; s < 64; ++s)
      scales.push_back(sigma / 1024.0 * std::pow(8.0 * 1024.0, s / 63.0));
    // candidate spacing from the approximate gcd of the projected gaps
    std::vector<double> sorted = proj;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> gaps;
    const double merge_tol = 1e-9 * sigma;
    for (std::size_t i = 1; i < sorted.size(); ++i) {
      const double gap = sorted[i] - sorted[i - 1];
      if (gap > merge_tol) gaps.push_back(gap);
    }
    if (!gaps.empty()) {
      const double g = approx_gcd(gaps, 1e-8 * sigma);
      const double range = sorted.back() - sorted.front();
      if (g > 1e-6 * sigma && range / g < 65536) scales.push_back(g);
    }

    for (double s : scales) {
      const double a = abs_ecf_at(proj, 2 * std::numbers::pi / s);
      if (a > audit.worst_abs) {
        audit.worst_abs = a;
        audit.worst_scale = s;
        audit.worst_direction = dir;
      }
    }
  }
  audit.verdict = audit.worst_abs > kLatticeThreshold ? Verdict::kFail : Verdict::kPass;
  return audit;
}

ChiTrace chi_bootstrap(double eta0, double nu, double beta_target) {
  if (!(eta0 > 0) || !(nu > 0) || !(beta_target > 0))
    throw std::domain_error("chi_bootstrap: all inputs must be positive");
  ChiTrace trace;
  trace.eta0 = eta0;
  trace.nu = nu;
  trace.beta_target = beta_target;
  double beta = eta0;
  trace.values.push_back(beta);
  while (beta < beta_target) {
    beta += std::min(beta, nu) / 2.0;
    trace.values.push_back(beta);
    ++trace.steps_to_target;
  }
  return trace;
}

C4C6Estimates c4_c6_estimates(const std::vector<SpectralSummary>& draws, double eta) {
  if (!(eta > 0)) throw std::domain_error("c4_c6_estimates: eta must be positive");
  if (draws.empty()) throw std::domain_error("c4_c6_estimates: no draws");
  C4C6Estimates est;

  std::vector<double> c4vals;
  std::vector<double> c6vals;
  std::vector<double> amax;
  c4vals.reserve(draws.size());
  amax.reserve(draws.size());
  for (const auto& s : draws) {
    amax.push_back(s.alpha_max);
    if (s.alpha_sec > 0)
      c4vals.push_back(std::pow(s.alpha_sec, -eta));
    else
      c6vals.push_back(s.alpha_max > 0 ? std::pow(s.alpha_max, -eta) : 0.0);
  }

  if (!c4vals.empty()) {
    std::vector<double> sorted = c4vals;
    std::sort(sorted.begin(), sorted.end());
    double total = 0;
    for (double v : sorted) total += v;
    const auto top1 = static_cast<std::size_t>(
        std::ceil(static_cast<double>(sorted.size()) * 0.01));
    double top_sum = 0;
    for (std::size_t i = sorted.size() - std::min(top1, sorted.size()); i < sorted.size(); ++i)
      top_sum += sorted[i];
    est.c4_divergent = total > 0 && top_sum > 0.5 * total;
    // winsorize the top 0.1% before averaging
    const double cap = quantile_sorted(sorted, 0.999);
    double acc = 0;
    for (double v : c4vals) acc += std::min(v, cap);
    est.c4_hat = acc / static_cast<double>(c4vals.size());
  }

  std::sort(amax.begin(), amax.end());
  est.c5_bounded_away = amax.front() > 0 && amax.front() > 0.01 * amax.back();
  LinearFit fit = lower_decile_tail_fit(amax);
  est.c5_exponent = fit.slope;
  est.c5_r_squared = fit.r_squared;

  if (c6vals.empty()) {
    est.c6_hat = 0;
    est.c6_std_error = 0;
  } else {
    // plain mean over all draws of alpha_max^{-eta} 1{alpha_sec = 0}
    const auto n = static_cast<double>(draws.size());
    double acc = 0, acc2 = 0;
    for (double v : c6vals) {
      acc += v;
      acc2 += v * v;
    }
    est.c6_hat = acc / n;
    const double var = std::max(0.0, acc2 / n - est.c6_hat * est.c6_hat);
    est.c6_std_error = std::sqrt(var / n);
  }
  return est;
}

}  // namespace sfpe
