#include "sfpe/process.hpp"

#include <algorithm>
#include <cmath>

#include "sfpe/parallel.hpp"
#include "sfpe/stats.hpp"

namespace sfpe {

ProcessConfig ProcessConfig::quicksort_cmp() { return {}; }

ProcessConfig ProcessConfig::quicksort_cmp_xch() {
  ProcessConfig c;
  c.kind = Kind::kQuicksortCmpXch;
  return c;
}

ProcessConfig ProcessConfig::polya_det(Eigen::MatrixXi replacement,
                                       std::vector<std::int64_t> init) {
  ProcessConfig c;
  c.kind = Kind::kPolya;
  c.replacement = std::move(replacement);
  c.init = std::move(init);
  if (c.replacement.rows() != c.replacement.cols() ||
      c.replacement.rows() != static_cast<Eigen::Index>(c.init.size()))
    throw ConfigError("polya: replacement must be q x q with q initial counts");
  std::int64_t total = 0;
  for (auto v : c.init) {
    if (v < 0) throw ConfigError("polya: initial counts must be nonnegative");
    total += v;
  }
  if (total < 1) throw ConfigError("polya: need at least one initial ball");
  if (c.replacement.rows() == 2) {
    const auto& r = c.replacement;
    if (r(0, 0) + r(0, 1) == r(1, 0) + r(1, 1) && r(0, 0) + r(0, 1) > 0)
      c.lambda_exponent = static_cast<double>(r(0, 0) - r(1, 0)) / (r(0, 0) + r(0, 1));
  }
  return c;
}

ProcessConfig ProcessConfig::polya_rand(double p1, double p2, std::vector<std::int64_t> init) {
  ProcessConfig c;
  c.kind = Kind::kPolya;
  c.random_two_color = true;
  c.p1 = p1;
  c.p2 = p2;
  c.init = std::move(init);
  c.replacement = Eigen::MatrixXi::Identity(2, 2);  // row sums 1; actual rows drawn per step
  if (c.init.size() != 2) throw ConfigError("polya_rand: two colors");
  if (c.init[0] + c.init[1] < 1) throw ConfigError("polya: need at least one initial ball");
  c.lambda_exponent = p1 + p2 - 1;
  return c;
}

ProcessConfig ProcessConfig::rrt_pathlen() {
  ProcessConfig c;
  c.kind = Kind::kRrtPathlen;
  return c;
}

ProcessConfig ProcessConfig::split_pathlen(int b, int s, int s0, int s1, SplitVectorLaw law) {
  ProcessConfig c;
  c.kind = Kind::kSplitPathlen;
  c.b = b;
  c.s = s;
  c.s0 = s0;
  c.s1 = s1;
  c.law = std::move(law);
  if (b < 2) throw ConfigError("split tree: b >= 2");
  if (s0 < 0 || s0 > s) throw ConfigError("split tree: requires 0 <= s0 <= s");
  if (s1 < 1 || s1 > s + 1) throw ConfigError("split tree: requires 0 < s1 <= s+1");
  if (c.law.b != b) throw ConfigError("split tree: law branch factor mismatch");
  return c;
}

ProcessConfig ProcessConfig::split_pathlen_wiener(int b, int s, int s0, int s1,
                                                  SplitVectorLaw law) {
  ProcessConfig c = split_pathlen(b, s, s0, s1, std::move(law));
  c.kind = Kind::kSplitPathlenWiener;
  return c;
}

std::vector<double> scaling_exponents(const ProcessConfig& config) {
  switch (config.kind) {
    case ProcessConfig::Kind::kQuicksortCmp:
    case ProcessConfig::Kind::kRrtPathlen:
    case ProcessConfig::Kind::kSplitPathlen:
      return {1.0};
    case ProcessConfig::Kind::kQuicksortCmpXch:
      return {1.0, 1.0};
    case ProcessConfig::Kind::kPolya:
      return std::vector<double>(static_cast<std::size_t>(config.init.size()),
                                 config.lambda_exponent);
    case ProcessConfig::Kind::kSplitPathlenWiener:
      return {2.0, 1.0};
  }
  throw ConfigError("unknown process kind");
}

std::optional<std::vector<double>> exact_mean(const ProcessConfig& config, std::int64_t n) {
  switch (config.kind) {
    case ProcessConfig::Kind::kQuicksortCmp:
      // E[C_n] = 2(n+1)H_n - 4n
      return std::vector<double>{2.0 * (n + 1) * harmonic(n) - 4.0 * n};
    case ProcessConfig::Kind::kRrtPathlen: {
      // E[Upsilon_n] = sum_{i=1}^{n-1} H_i
      double acc = 0, h = 0;
      for (std::int64_t i = 1; i < n; ++i) {
        h += 1.0 / static_cast<double>(i);
        acc += h;
      }
      return std::vector<double>{acc};
    }
    default:
      return std::nullopt;
  }
}

namespace {

double quicksort_comparisons(std::int64_t n, SplitRng& rng) {
  // subproblem-size recursion; a random permutation splits into two
  // uniform subproblems around a uniform pivot rank
  double total = 0;
  std::vector<std::int64_t> stack{n};
  while (!stack.empty()) {
    const std::int64_t m = stack.back();
    stack.pop_back();
    if (m <= 1) continue;
    total += static_cast<double>(m - 1);
    const auto k = static_cast<std::int64_t>(rng.uniform_index(static_cast<std::uint64_t>(m))) + 1;
    stack.push_back(k - 1);
    stack.push_back(m - k);
  }
  return total;
}

// exchanges per partition: elements of the left block that belong right,
// hypergeometric over the pre-partition layout, plus the pivot move
std::pair<double, double> quicksort_cmp_xch(std::int64_t n, SplitRng& rng) {
  double cmp = 0, xch = 0;
  std::vector<std::int64_t> stack{n};
  while (!stack.empty()) {
    const std::int64_t m = stack.back();
    stack.pop_back();
    if (m <= 1) continue;
    cmp += static_cast<double>(m - 1);
    const auto k = static_cast<std::int64_t>(rng.uniform_index(static_cast<std::uint64_t>(m))) + 1;
    std::int64_t succ = m - k;   // elements larger than the pivot
    std::int64_t rest = m - 1;   // non-pivot elements
    for (std::int64_t i = 0; i < k - 1; ++i) {
      if (rng.uniform_index(static_cast<std::uint64_t>(rest)) <
          static_cast<std::uint64_t>(succ)) {
        xch += 1;
        --succ;
      }
      --rest;
    }
    xch += 1;  // pivot swap
    stack.push_back(k - 1);
    stack.push_back(m - k);
  }
  return {cmp, xch};
}

std::vector<double> polya_composition(const ProcessConfig& config, std::int64_t n,
                                      SplitRng& rng) {
  const auto q = static_cast<int>(config.init.size());
  std::vector<std::int64_t> counts = config.init;
  std::int64_t total = 0;
  for (auto v : counts) total += v;
  for (std::int64_t step = 0; step < n; ++step) {
    auto pick = static_cast<std::int64_t>(rng.uniform_index(static_cast<std::uint64_t>(total)));
    int color = 0;
    while (pick >= counts[static_cast<std::size_t>(color)]) {
      pick -= counts[static_cast<std::size_t>(color)];
      ++color;
    }
    if (config.random_two_color) {
      const double p = color == 0 ? config.p1 : config.p2;
      const int f = rng.uniform() < p ? 1 : 0;
      counts[static_cast<std::size_t>(color)] += f;
      counts[static_cast<std::size_t>(1 - color)] += 1 - f;
      total += 1;
    } else {
      for (int j = 0; j < q; ++j) {
        counts[static_cast<std::size_t>(j)] += config.replacement(color, j);
        total += config.replacement(color, j);
      }
    }
  }
  std::vector<double> out;
  out.reserve(counts.size());
  for (auto v : counts) out.push_back(static_cast<double>(v));
  return out;
}

double rrt_pathlen(std::int64_t n, SplitRng& rng) {
  std::vector<std::int32_t> depth(static_cast<std::size_t>(std::max<std::int64_t>(n, 1)), 0);
  double total = 0;
  for (std::int64_t i = 1; i < n; ++i) {
    const auto parent = rng.uniform_index(static_cast<std::uint64_t>(i));
    depth[static_cast<std::size_t>(i)] = depth[static_cast<std::size_t>(parent)] + 1;
    total += depth[static_cast<std::size_t>(i)];
  }
  return total;
}

struct SplitTree {
  struct Node {
    std::int32_t first_child = -1;      // children are contiguous
    std::int32_t depth = 0;
    std::int32_t balls = 0;
    std::vector<double> split_vec;      // drawn once at birth, reused forever
  };
  std::vector<Node> nodes;
  const ProcessConfig* config;
  SplitRng* rng;

  int child_of(int node) {
    const auto& v = nodes[static_cast<std::size_t>(node)].split_vec;
    double u = rng->uniform();
    int j = 0;
    while (j + 1 < config->b && u >= v[static_cast<std::size_t>(j)]) {
      u -= v[static_cast<std::size_t>(j)];
      ++j;
    }
    return nodes[static_cast<std::size_t>(node)].first_child + j;
  }

  void give_birth(int node) {
    const auto base = static_cast<std::int32_t>(nodes.size());
    nodes[static_cast<std::size_t>(node)].first_child = base;
    nodes[static_cast<std::size_t>(node)].split_vec = config->law.sample(*rng);
    const std::int32_t d = nodes[static_cast<std::size_t>(node)].depth + 1;
    for (int j = 0; j < config->b; ++j) {
      Node child;
      child.depth = d;
      nodes.push_back(child);
    }
  }

  // ball overflow: keep s0, send the rest down; newborn children holding
  // more than s1 balls split again
  void split(int node) {
    give_birth(node);
    auto& nd = nodes[static_cast<std::size_t>(node)];
    std::int32_t moving = nd.balls - static_cast<std::int32_t>(config->s0);
    nd.balls = static_cast<std::int32_t>(config->s0);
    std::vector<int> pending;
    for (std::int32_t i = 0; i < moving; ++i) {
      const int c = child_of(node);
      if (++nodes[static_cast<std::size_t>(c)].balls ==
          static_cast<std::int32_t>(config->s1) + 1)
        pending.push_back(c);
    }
    for (int c : pending)
      if (nodes[static_cast<std::size_t>(c)].balls > config->s1) split(c);
  }

  void insert() {
    int node = 0;
    while (nodes[static_cast<std::size_t>(node)].first_child >= 0) node = child_of(node);
    auto& nd = nodes[static_cast<std::size_t>(node)];
    ++nd.balls;
    if (nd.balls > config->s) split(node);
  }

  double path_length() const {
    double acc = 0;
    for (const auto& nd : nodes) acc += static_cast<double>(nd.balls) * nd.depth;
    return acc;
  }

  // Wiener index over balls via per-edge split counts
  double wiener(std::int64_t n_balls) const {
    std::vector<std::int64_t> subtree(nodes.size(), 0);
    for (std::size_t i = nodes.size(); i-- > 0;) {
      subtree[i] += nodes[i].balls;
      if (nodes[i].first_child >= 0)
        for (int j = 0; j < config->b; ++j)
          subtree[i] += subtree[static_cast<std::size_t>(nodes[i].first_child + j)];
    }
    double acc = 0;
    for (std::size_t i = 1; i < nodes.size(); ++i)
      acc += static_cast<double>(subtree[i]) * static_cast<double>(n_balls - subtree[i]);
    return acc;
  }
};

}  // namespace

ProcessRun run(const ProcessConfig& config, std::int64_t n, SplitRng& rng) {
  if (n < 1) throw ConfigError("process run: n >= 1");
  ProcessRun out;
  switch (config.kind) {
    case ProcessConfig::Kind::kQuicksortCmp:
      out.statistic = {quicksort_comparisons(n, rng)};
      break;
    case ProcessConfig::Kind::kQuicksortCmpXch: {
      auto [cmp, xch] = quicksort_cmp_xch(n, rng);
      out.statistic = {cmp, xch};
      break;
    }
    case ProcessConfig::Kind::kPolya:
      out.statistic = polya_composition(config, n, rng);
      break;
    case ProcessConfig::Kind::kRrtPathlen:
      out.statistic = {rrt_pathlen(n, rng)};
      break;
    case ProcessConfig::Kind::kSplitPathlen:
    case ProcessConfig::Kind::kSplitPathlenWiener: {
      SplitTree tree;
      tree.config = &config;
      tree.rng = &rng;
      tree.nodes.push_back({});
      for (std::int64_t i = 0; i < n; ++i) tree.insert();
      if (config.kind == ProcessConfig::Kind::kSplitPathlen)
        out.statistic = {tree.path_length()};
      else
        out.statistic = {tree.wiener(n), tree.path_length()};
      break;
    }
  }
  const std::vector<double> exps = scaling_exponents(config);
  const auto center = exact_mean(config, n);
  out.centered = center.has_value();
  out.scaled.resize(out.statistic.size());
  for (std::size_t i = 0; i < out.statistic.size(); ++i) {
    const double c = center ? (*center)[i] : 0.0;
    out.scaled[i] = (out.statistic[i] - c) / std::pow(static_cast<double>(n), exps[i]);
  }
  return out;
}

Eigen::MatrixXd scaled_batch(const ProcessConfig& config, std::int64_t n, int runs, SplitRng& rng,
                             bool prefer_exact_center, int threads) {
  if (runs < 1) throw ConfigError("scaled_batch: runs >= 1");
  const std::vector<double> exps = scaling_exponents(config);
  const auto k = static_cast<Eigen::Index>(exps.size());
  Eigen::MatrixXd raw(k, runs);
  const SplitRng base = rng.fork(0x73696d73);
  parallel_for(runs, threads, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t i = begin; i < end; ++i) {
      SplitRng run_rng = base.fork(static_cast<std::uint64_t>(i));
      const ProcessRun r = run(config, n, run_rng);
      for (Eigen::Index j = 0; j < k; ++j)
        raw(j, i) = r.statistic[static_cast<std::size_t>(j)];
    }
  });

  Eigen::VectorXd center(k);
  const auto exact = exact_mean(config, n);
  if (prefer_exact_center && exact) {
    for (Eigen::Index j = 0; j < k; ++j) center(j) = (*exact)[static_cast<std::size_t>(j)];
  } else {
    center = raw.rowwise().mean();
  }
  for (Eigen::Index j = 0; j < k; ++j) {
    const double scale = std::pow(static_cast<double>(n), exps[static_cast<std::size_t>(j)]);
    raw.row(j) = (raw.row(j).array() - center(j)) / scale;
  }
  return raw;
}

}  // namespace sfpe
