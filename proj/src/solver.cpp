#include "sfpe/solver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>

#include "sfpe/parallel.hpp"
#include "sfpe/stats.hpp"

namespace sfpe {

namespace {

// stream path tags so distinct purposes never share a stream
constexpr std::uint64_t kTagInit = 0x696e6974;        // pool initialization
constexpr std::uint64_t kTagIterate = 0x69746572;     // per-iteration slot streams
constexpr std::uint64_t kTagDirections = 0x64697273;  // sliced-distance directions
constexpr std::uint64_t kTagBootstrap = 0x626f6f74;   // noise-floor resampling

SamplePool bootstrap_resample(const SamplePool& pool, SplitRng& rng) {
  SamplePool out = pool;
  for (Eigen::Index i = 0; i < pool.size(); ++i)
    out.values.col(i) =
        pool.values.col(static_cast<Eigen::Index>(rng.uniform_index(
            static_cast<std::uint64_t>(pool.size()))));
  return out;
}

Eigen::VectorXd slot_value(const EquationSystem& system, const std::vector<SamplePool>& pools,
                           int r, SplitRng& rng) {
  RawDraw draw = system.raw_draw(r, rng);
  const auto n = pools[0].size();
  Eigen::VectorXd out = draw.shift;
  for (std::size_t j = 0; j < draw.matrices.size(); ++j) {
    const int tgt = system.target(r, static_cast<int>(j));
    const auto idx = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::uint64_t>(n)));
    out.noalias() += draw.matrices[j] * pools[static_cast<std::size_t>(tgt)].values.col(idx);
  }
  return out;
}

}  // namespace

Eigen::MatrixXd SamplePool::covariance() const {
  const auto n = static_cast<double>(values.cols());
  if (n < 1) return Eigen::MatrixXd::Zero(values.rows(), values.rows());
  Eigen::MatrixXd centered = values.colwise() - mean();
  return (centered * centered.transpose()) / n;
}

std::vector<SamplePool> iterate(const EquationSystem& system, const std::vector<SamplePool>& pools,
                                const SplitRng& root, int threads, int* overflow_slots) {
  if (static_cast<int>(pools.size()) != system.m())
    throw std::domain_error("iterate: need one pool per equation");
  const auto n = pools[0].size();
  for (const auto& p : pools) {
    if (p.dim() != system.d()) throw std::domain_error("iterate: pool dimension mismatch");
    if (p.size() != n) throw std::domain_error("iterate: pools must share one size");
  }

  const int generation = pools[0].generation + 1;
  const SplitRng gen_root = root.fork(kTagIterate).fork(static_cast<std::uint64_t>(generation));

  std::vector<SamplePool> next(pools.size());
  std::atomic<int> flagged{0};
  for (int r = 0; r < system.m(); ++r) {
    auto& out = next[static_cast<std::size_t>(r)];
    out.values.resize(system.d(), n);
    out.generation = generation;
    out.seed = pools[static_cast<std::size_t>(r)].seed;
    const SplitRng eq_root = gen_root.fork(static_cast<std::uint64_t>(r));
    parallel_for(n, threads, [&](std::int64_t begin, std::int64_t end) {
      for (std::int64_t i = begin; i < end; ++i) {
        SplitRng slot = eq_root.fork(static_cast<std::uint64_t>(i));
        Eigen::VectorXd v = slot_value(system, pools, r, slot);
        if (!v.allFinite()) {
          flagged.fetch_add(1, std::memory_order_relaxed);
          v = slot_value(system, pools, r, slot);  // one retry on the same stream
          if (!v.allFinite())
            throw std::runtime_error("iterate: slot stayed non-finite after resampling");
        }
        out.values.col(i) = v;
      }
    });
  }
  if (overflow_slots) *overflow_slots = flagged.load();
  return next;
}

SolveResult solve(const EquationSystem& system, std::int64_t n, std::uint64_t seed,
                  const SolveOptions& opts) {
  if (n < 1) throw std::domain_error("solve: pool size must be positive");
  const SplitRng root(seed);

  Eigen::MatrixXd pin = system.mean_constraint().value_or(
      Eigen::MatrixXd::Zero(system.d(), system.m()));
  const bool pinned = system.mean_constraint().has_value();

  SolveResult result;
  result.pools.resize(static_cast<std::size_t>(system.m()));
  for (int r = 0; r < system.m(); ++r) {
    auto& pool = result.pools[static_cast<std::size_t>(r)];
    pool.values = pin.col(r).replicate(1, n);
    pool.generation = 0;
    pool.seed = seed;
    if (opts.warm_start_sd > 0) {
      const SplitRng eq = root.fork(kTagInit).fork(static_cast<std::uint64_t>(r));
      parallel_for(n, opts.threads, [&](std::int64_t begin, std::int64_t end) {
        for (std::int64_t i = begin; i < end; ++i) {
          SplitRng slot = eq.fork(static_cast<std::uint64_t>(i));
          for (int k = 0; k < system.d(); ++k)
            pool.values(k, i) += opts.warm_start_sd * slot.normal();
        }
      });
    }
  }

  auto& diag = result.diagnostics;
  int hits = 0;
  std::vector<double> prev_dist;
  for (int it = 1; it <= opts.max_iters; ++it) {
    int flagged = 0;
    std::vector<SamplePool> next = iterate(system, result.pools, root, opts.threads, &flagged);
    if (pinned) {
      for (int r = 0; r < system.m(); ++r) {
        auto& pool = next[static_cast<std::size_t>(r)];
        pool.values.colwise() += (pin.col(r) - pool.mean()).eval();
      }
    }

    SplitRng dir_rng =
        root.fork(kTagDirections).fork(static_cast<std::uint64_t>(it));
    const bool auto_tol = !(opts.tol > 0);
    std::vector<double> dist(static_cast<std::size_t>(system.m()));
    std::vector<double> floors(static_cast<std::size_t>(system.m()), 0.0);
    bool all_below = true;
    std::vector<Eigen::VectorXd> means;
    std::vector<Eigen::MatrixXd> covs;
    for (int r = 0; r < system.m(); ++r) {
      auto& pool = next[static_cast<std::size_t>(r)];
      dist[static_cast<std::size_t>(r)] =
          pool_distance(result.pools[static_cast<std::size_t>(r)], pool, opts.p,
                        opts.sliced_directions, dir_rng);
      double threshold = opts.tol;
      bool hit = false;
      if (auto_tol) {
        SplitRng boot = root.fork(kTagBootstrap)
                            .fork(static_cast<std::uint64_t>(it))
                            .fork(static_cast<std::uint64_t>(r));
        const SamplePool b1 = bootstrap_resample(pool, boot);
        const SamplePool b2 = bootstrap_resample(pool, boot);
        floors[static_cast<std::size_t>(r)] =
            pool_distance(b1, b2, opts.p, opts.sliced_directions, dir_rng);
        threshold = 2.0 * floors[static_cast<std::size_t>(r)];
        // plateau clause: a distance still shrinking geometrically is
        // signal, not noise, however small it is against the floor
        const bool plateaued =
            !prev_dist.empty() &&
            dist[static_cast<std::size_t>(r)] >= 0.9 * prev_dist[static_cast<std::size_t>(r)];
        hit = dist[static_cast<std::size_t>(r)] < threshold && plateaued;
      } else {
        hit = dist[static_cast<std::size_t>(r)] < threshold;
      }
      all_below = all_below && hit;
      means.push_back(pool.mean());
      covs.push_back(pool.covariance());
    }
    prev_dist = dist;
    diag.distances.push_back(std::move(dist));
    diag.noise_floors.push_back(std::move(floors));
    diag.means.push_back(std::move(means));
    diag.covariances.push_back(std::move(covs));
    diag.overflow_slots.push_back(flagged);
    diag.iterations = it;
    result.pools = std::move(next);

    hits = all_below ? hits + 1 : 0;
    if (hits >= opts.consecutive_hits) {
      diag.converged = true;
      diag.stop_rule =
          std::to_string(opts.consecutive_hits) + " consecutive iterations below " +
          (auto_tol ? "2x the resampling noise floor" : "tol=" + std::to_string(opts.tol));
      return result;
    }
  }
  diag.converged = false;
  diag.stop_rule = "max_iters reached";
  return result;
}

double wasserstein_1d(std::span<const double> a, std::span<const double> b, double p) {
  if (a.size() != b.size()) throw std::domain_error("wasserstein_1d: unequal sizes");
  if (a.empty()) throw std::domain_error("wasserstein_1d: empty samples");
  if (p < 1) throw std::domain_error("wasserstein_1d: order must be >= 1");
  if (!std::is_sorted(a.begin(), a.end()) || !std::is_sorted(b.begin(), b.end()))
    throw std::domain_error("wasserstein_1d: inputs must be sorted");
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::pow(std::abs(a[i] - b[i]), p);
  return std::pow(acc / static_cast<double>(a.size()), 1.0 / p);
}

double sliced_distance(const SamplePool& a, const SamplePool& b, int directions, double p,
                       SplitRng& rng) {
  if (a.dim() != b.dim()) throw std::domain_error("sliced_distance: dimension mismatch");
  if (a.size() != b.size()) throw std::domain_error("sliced_distance: unequal sizes");
  if (a.dim() < 2) throw std::domain_error("sliced_distance: requires d >= 2");
  if (directions < 1) throw std::domain_error("sliced_distance: need at least one direction");
  const auto n = a.size();
  std::vector<double> pa(static_cast<std::size_t>(n)), pb(static_cast<std::size_t>(n));
  double acc = 0;
  for (int k = 0; k < directions; ++k) {
    Eigen::VectorXd dir(a.dim());
    do {
      for (int i = 0; i < a.dim(); ++i) dir(i) = rng.normal();
    } while (dir.norm() == 0);
    dir.normalize();
    Eigen::Map<Eigen::VectorXd>(pa.data(), n) = a.values.transpose() * dir;
    Eigen::Map<Eigen::VectorXd>(pb.data(), n) = b.values.transpose() * dir;
    std::sort(pa.begin(), pa.end());
    std::sort(pb.begin(), pb.end());
    acc += wasserstein_1d(pa, pb, p);
  }
  return acc / directions;
}

double pool_distance(const SamplePool& a, const SamplePool& b, double p, int directions,
                     SplitRng& rng) {
  if (a.dim() == 1) {
    std::vector<double> sa(a.values.data(), a.values.data() + a.size());
    std::vector<double> sb(b.values.data(), b.values.data() + b.size());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    return wasserstein_1d(sa, sb, p);
  }
  return sliced_distance(a, b, directions, p, rng);
}

std::vector<MomentResidual> moment_residual(const EquationSystem& system,
                                            const std::vector<SamplePool>& pools, int order,
                                            std::int64_t n_draws, SplitRng& rng) {
  if (order != 1 && order != 2) throw std::domain_error("moment_residual: order must be 1 or 2");
  if (static_cast<int>(pools.size()) != system.m())
    throw std::domain_error("moment_residual: need one pool per equation");
  const int d = system.d();
  const auto n_pool = static_cast<double>(pools[0].size());

  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covs;
  std::vector<Eigen::VectorXd> sds;  // componentwise sample sd per pool
  for (const auto& pool : pools) {
    means.push_back(pool.mean());
    covs.push_back(pool.covariance());
    Eigen::VectorXd sd(d);
    for (int k = 0; k < d; ++k)
      sd(k) = std::sqrt(covs.back()(k, k) * n_pool / std::max(1.0, n_pool - 1));
    sds.push_back(sd);
  }

  std::vector<MomentResidual> out;
  for (int r = 0; r < system.m(); ++r) {
    const int rows = d, cols = order == 1 ? 1 : d;
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(rows, cols);
    Eigen::MatrixXd acc2 = Eigen::MatrixXd::Zero(rows, cols);  // elementwise squares
    Eigen::MatrixXd mean_gain = Eigen::MatrixXd::Zero(d, d);   // sum_j |E A_j| for error prop
    std::vector<Eigen::MatrixXd> abs_gain;                     // per-target accumulated |E A_j|
    abs_gain.assign(static_cast<std::size_t>(system.m()), Eigen::MatrixXd::Zero(d, d));

    SplitRng eq_rng = rng.fork(static_cast<std::uint64_t>(r));
    for (std::int64_t k = 0; k < n_draws; ++k) {
      SplitRng draw_rng = eq_rng.fork(static_cast<std::uint64_t>(k));
      RawDraw draw = system.raw_draw(r, draw_rng);
      Eigen::MatrixXd term;
      if (order == 1) {
        Eigen::VectorXd v = draw.shift;
        for (std::size_t j = 0; j < draw.matrices.size(); ++j) {
          const int tgt = system.target(r, static_cast<int>(j));
          v.noalias() += draw.matrices[j] * means[static_cast<std::size_t>(tgt)];
          abs_gain[static_cast<std::size_t>(tgt)] += draw.matrices[j].cwiseAbs() / n_draws;
        }
        term = v;
      } else {
        Eigen::MatrixXd m2 = draw.shift * draw.shift.transpose();
        for (std::size_t j = 0; j < draw.matrices.size(); ++j) {
          const int tgt = system.target(r, static_cast<int>(j));
          m2.noalias() +=
              draw.matrices[j] * covs[static_cast<std::size_t>(tgt)] * draw.matrices[j].transpose();
        }
        term = m2;
      }
      acc += term;
      acc2 += term.cwiseProduct(term);
    }
    const auto nd = static_cast<double>(n_draws);
    Eigen::MatrixXd mc_mean = acc / nd;
    Eigen::MatrixXd mc_var = (acc2 / nd - mc_mean.cwiseProduct(mc_mean)).cwiseMax(0.0);

    MomentResidual res;
    if (order == 1) {
      res.value = means[static_cast<std::size_t>(r)] - mc_mean;
      Eigen::VectorXd se2 = mc_var / nd;  // MC error of the draw average
      se2 += covs[static_cast<std::size_t>(r)].diagonal() / n_pool;  // pool mean error
      for (int tgt = 0; tgt < system.m(); ++tgt) {
        Eigen::VectorXd prop =
            abs_gain[static_cast<std::size_t>(tgt)] * sds[static_cast<std::size_t>(tgt)] /
            std::sqrt(n_pool);
        se2 += prop.cwiseProduct(prop);
      }
      res.std_error = se2.cwiseSqrt();
    } else {
      res.value = covs[static_cast<std::size_t>(r)] - mc_mean;
      // pool second-moment error: sd of centered products / sqrt(N)
      Eigen::MatrixXd centered =
          pools[static_cast<std::size_t>(r)].values.colwise() -
          means[static_cast<std::size_t>(r)];
      Eigen::MatrixXd prod_var = Eigen::MatrixXd::Zero(d, d);
      for (Eigen::Index c = 0; c < centered.cols(); ++c) {
        Eigen::MatrixXd pr = centered.col(c) * centered.col(c).transpose() -
                             covs[static_cast<std::size_t>(r)];
        prod_var += pr.cwiseProduct(pr);
      }
      prod_var /= n_pool;
      res.std_error = (mc_var / nd + prod_var / n_pool).cwiseSqrt() * 2.0;
    }
    out.push_back(std::move(res));
  }
  return out;
}

double ks_rate_bound(double lp_distance, double f_sup, double p) {
  if (!(lp_distance > 0) || !(f_sup > 0)) throw std::domain_error("ks_rate_bound: inputs must be positive");
  if (p < 1) throw std::domain_error("ks_rate_bound: order must be >= 1");
  return std::pow((p + 1) * std::pow(f_sup, p), 1.0 / (1.0 + p)) *
         std::pow(lp_distance, p / (1.0 + p));
}

}  // namespace sfpe
