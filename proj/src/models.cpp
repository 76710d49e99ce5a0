#include "sfpe/models.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "sfpe/stats.hpp"

namespace sfpe {

namespace {

double xlogx(double x) { return x > 0 ? x * std::log(x) : 0.0; }

// quicksort toll: g(u) = 2u ln u + 2(1-u) ln(1-u) + 1
double quicksort_toll(double u) { return 2 * xlogx(u) + 2 * xlogx(1 - u) + 1; }

// recursive-tree toll: h(u) = u + u ln u + (1-u) ln(1-u)
double rrt_toll(double u) { return u + xlogx(u) + xlogx(1 - u); }

Eigen::MatrixXd scalar1(double v) {
  Eigen::MatrixXd m(1, 1);
  m(0, 0) = v;
  return m;
}

Eigen::MatrixXd split2d_matrix(double v) {
  Eigen::MatrixXd m(2, 2);
  m << v * v, v * (1 - v), 0, v;
  return m;
}

}  // namespace

SplitVectorLaw SplitVectorLaw::deterministic(std::vector<double> v) {
  SplitVectorLaw law;
  law.kind = Kind::kDeterministic;
  law.b = static_cast<int>(v.size());
  law.fixed = std::move(v);
  if (law.b < 2) throw ConfigError("split vector needs at least two components");
  double sum = 0;
  for (double x : law.fixed) {
    if (x < 0) throw ConfigError("split vector components must be nonnegative");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-12) throw ConfigError("split vector must sum to 1");
  return law;
}

SplitVectorLaw SplitVectorLaw::binary_uniform() {
  SplitVectorLaw law;
  law.kind = Kind::kBinaryUniform;
  law.b = 2;
  return law;
}

SplitVectorLaw SplitVectorLaw::dirichlet(int b, double alpha) {
  SplitVectorLaw law;
  law.kind = Kind::kDirichlet;
  law.b = b;
  law.alpha = alpha;
  if (b < 2) throw ConfigError("dirichlet split vector needs b >= 2");
  if (!(alpha > 0)) throw ConfigError("dirichlet split vector needs alpha > 0");
  return law;
}

std::vector<double> SplitVectorLaw::sample(SplitRng& rng) const {
  switch (kind) {
    case Kind::kDeterministic:
      return fixed;
    case Kind::kBinaryUniform: {
      const double u = rng.uniform_open();
      return {u, 1 - u};
    }
    case Kind::kDirichlet:
      return rng.dirichlet(alpha, b);
  }
  throw ConfigError("unknown split vector law");
}

double SplitVectorLaw::mu() const {
  switch (kind) {
    case Kind::kDeterministic: {
      double acc = 0;
      for (double v : fixed) acc += xlogx(v);
      if (acc == 0) throw ConfigError("degenerate split vector: mu = 0");
      return -acc;
    }
    case Kind::kBinaryUniform:
      return 0.5;  // -2 E[U ln U] = 1/2
    case Kind::kDirichlet:
      // E[V ln V] per component gives mu = psi(b alpha + 1) - psi(alpha + 1)
      return digamma(b * alpha + 1) - digamma(alpha + 1);
  }
  throw ConfigError("unknown split vector law");
}

double SplitVectorLaw::mean_sum_sq() const {
  switch (kind) {
    case Kind::kDeterministic: {
      double acc = 0;
      for (double v : fixed) acc += v * v;
      return acc;
    }
    case Kind::kBinaryUniform:
      return 2.0 / 3.0;  // E[U^2 + (1-U)^2]
    case Kind::kDirichlet:
      return (alpha + 1) / (b * alpha + 1);
  }
  throw ConfigError("unknown split vector law");
}

ModelConfig ModelConfig::quicksort() { return {}; }

ModelConfig ModelConfig::quicksort2d() {
  ModelConfig c;
  c.kind = Kind::kQuicksort2d;
  return c;
}

ModelConfig ModelConfig::rrt() {
  ModelConfig c;
  c.kind = Kind::kRrt;
  return c;
}

ModelConfig ModelConfig::urn_det(int a, int b, int cc, int d) {
  ModelConfig c;
  c.kind = Kind::kUrnDet;
  c.urn_a = a;
  c.urn_b = b;
  c.urn_c = cc;
  c.urn_d = d;
  return c;
}

ModelConfig ModelConfig::urn_rand(double p1, double p2) {
  ModelConfig c;
  c.kind = Kind::kUrnRand;
  c.p1 = p1;
  c.p2 = p2;
  return c;
}

ModelConfig ModelConfig::urn_multi(Eigen::MatrixXi replacement, std::complex<double> lambda) {
  ModelConfig c;
  c.kind = Kind::kUrnMulti;
  c.replacement = std::move(replacement);
  c.lambda_eig = lambda;
  return c;
}

ModelConfig ModelConfig::split(SplitVectorLaw law) {
  ModelConfig c;
  c.kind = Kind::kSplit;
  c.split_law = std::move(law);
  return c;
}

ModelConfig ModelConfig::split2d(SplitVectorLaw law, std::optional<double> cc) {
  ModelConfig c;
  c.kind = Kind::kSplit2d;
  c.split_law = std::move(law);
  c.c_const = cc;
  return c;
}

namespace {

struct UrnDetParams {
  int k;
  double lambda;
  double alpha;
  double mean_coeff_sum;  // K E[D^lambda]
};

UrnDetParams urn_det_params(const ModelConfig& c) {
  if (c.urn_a + c.urn_b != c.urn_c + c.urn_d)
    throw ConfigError("urn_det requires a+b = c+d (balanced scheme)");
  if (c.urn_b * c.urn_c <= 0) throw ConfigError("urn_det requires bc > 0");
  if (c.urn_a < 0 || c.urn_b < 0 || c.urn_c < 0 || c.urn_d < 0)
    throw ConfigError("urn_det entries must be nonnegative");
  UrnDetParams p;
  p.k = c.urn_a + c.urn_b + 1;
  p.lambda = static_cast<double>(c.urn_a - c.urn_c) / (c.urn_a + c.urn_b);
  if (!(p.lambda > 0.5) || p.lambda > 1.0)
    throw ConfigError("urn_det requires lambda = (a-c)/(a+b) in (1/2, 1]; got " +
                      std::to_string(p.lambda));
  p.alpha = 1.0 / (p.k - 1);
  p.mean_coeff_sum = p.k * p.alpha / (p.alpha + p.lambda);
  return p;
}

struct UrnMultiParams {
  int q;
  int s;                        // balanced row sum
  std::complex<double> lambda;  // validated eigenvalue
  Eigen::VectorXcd mean;        // pinned means: eigenvector of R for lambda
  std::vector<std::vector<int>> targets;
};

UrnMultiParams urn_multi_params(const ModelConfig& c) {
  UrnMultiParams p;
  const auto& R = c.replacement;
  if (R.rows() < 2 || R.rows() != R.cols())
    throw ConfigError("urn_multi needs a square replacement matrix with q >= 2");
  p.q = static_cast<int>(R.rows());
  if (R.minCoeff() < 0) throw ConfigError("urn_multi replacement entries must be nonnegative");
  p.s = R.row(0).sum();
  for (int r = 1; r < p.q; ++r)
    if (R.row(r).sum() != p.s) throw ConfigError("urn_multi requires a balanced matrix");
  if (p.s < 1) throw ConfigError("urn_multi requires positive row sums");

  Eigen::EigenSolver<Eigen::MatrixXd> es(R.cast<double>());
  int best = -1;
  double best_gap = 1e-8 * p.s;
  for (int i = 0; i < p.q; ++i) {
    const double gap = std::abs(es.eigenvalues()(i) - c.lambda_eig);
    if (gap < best_gap) {
      best_gap = gap;
      best = i;
    }
  }
  if (best < 0) throw ConfigError("urn_multi: lambda_eig is not an eigenvalue of the matrix");
  p.lambda = es.eigenvalues()(best);
  if (!(p.lambda.real() > p.s / 2.0) || std::abs(p.lambda - std::complex<double>(p.s, 0)) < 1e-9)
    throw ConfigError("urn_multi requires a large eigenvalue: Re(lambda) > S/2, lambda != S");

  Eigen::VectorXcd v = es.eigenvectors().col(best);
  // deterministic normalization: unit norm, first significant entry real positive
  for (int i = 0; i < p.q; ++i) {
    if (std::abs(v(i)) > 1e-8) {
      v *= std::conj(v(i)) / std::abs(v(i));
      break;
    }
  }
  p.mean = v / v.norm();

  // term targets: the initial ball of color r plus the replacement row
  p.targets.resize(static_cast<std::size_t>(p.q));
  for (int r = 0; r < p.q; ++r) {
    auto& t = p.targets[static_cast<std::size_t>(r)];
    t.push_back(r);
    for (int col = 0; col < p.q; ++col)
      for (int rep = 0; rep < R(r, col); ++rep) t.push_back(col);
  }
  return p;
}

void validate_split(const SplitVectorLaw& law) {
  if (law.is_deterministic()) {
    for (double v : law.fixed)
      if (v >= 1.0 - 1e-12) throw ConfigError("split vector must satisfy P(exists V_i = 1) < 1");
  }
}

double split2d_forced_c(const SplitVectorLaw& law) {
  const double denom = 1.0 - law.mean_sum_sq();
  if (denom <= 0) throw ConfigError("split2d: E[1 - sum V^2] must be positive");
  return 1.0 / denom;
}

}  // namespace

ModelInfo describe(const ModelConfig& config) {
  ModelInfo info;
  switch (config.kind) {
    case ModelConfig::Kind::kQuicksort:
      info.name = "quicksort";
      break;
    case ModelConfig::Kind::kQuicksort2d:
      info.name = "quicksort2d";
      info.d = 2;
      break;
    case ModelConfig::Kind::kRrt:
      info.name = "rrt";
      break;
    case ModelConfig::Kind::kUrnDet: {
      const UrnDetParams p = urn_det_params(config);
      info.name = "urn_det";
      info.m = 2;
      info.urn_k = p.k;
      info.lambda_urn = p.lambda;
      info.dirichlet_alpha = p.alpha;
      break;
    }
    case ModelConfig::Kind::kUrnRand: {
      info.name = "urn_rand";
      info.m = 2;
      info.lambda_urn = config.p1 + config.p2 - 1;
      break;
    }
    case ModelConfig::Kind::kUrnMulti: {
      const UrnMultiParams p = urn_multi_params(config);
      info.name = "urn_multi";
      info.m = p.q;
      info.d = 2;
      info.urn_row_sum = p.s;
      info.lambda_eig = p.lambda;
      info.eigen_mean = p.mean;
      info.dirichlet_alpha = 1.0 / p.s;
      break;
    }
    case ModelConfig::Kind::kSplit:
      info.name = "split";
      info.mu_split = config.split_law.mu();
      break;
    case ModelConfig::Kind::kSplit2d:
      info.name = "split2d";
      info.d = 2;
      info.mu_split = config.split_law.mu();
      info.split_c = config.c_const.value_or(split2d_forced_c(config.split_law));
      break;
  }
  return info;
}

EquationSystem build(const ModelConfig& config) {
  using IndexMap = EquationSystem::IndexMap;
  using Sampler = EquationSystem::Sampler;
  const IndexMap self = [](int) { return 0; };

  switch (config.kind) {
    case ModelConfig::Kind::kQuicksort: {
      Sampler sampler = [](SplitRng& rng) {
        const double u = rng.uniform_open();
        RawDraw draw;
        draw.matrices = {scalar1(u), scalar1(1 - u)};
        draw.shift = Eigen::VectorXd::Constant(1, quicksort_toll(u));
        return draw;
      };
      EquationSystem sys(1, 1, {self}, {sampler});
      sys.set_mean_constraint(Eigen::MatrixXd::Zero(1, 1));
      return sys;
    }
    case ModelConfig::Kind::kQuicksort2d: {
      Sampler sampler = [](SplitRng& rng) {
        const double u = rng.uniform_open();
        RawDraw draw;
        draw.matrices = {u * Eigen::MatrixXd::Identity(2, 2),
                         (1 - u) * Eigen::MatrixXd::Identity(2, 2)};
        // entropy-weighted toll, centered: the coefficient sum has mean 1,
        // so the zero-mean joint limit requires E[b] = 0 (E[ent] = -1)
        const double ent = 2 * xlogx(u) + 2 * xlogx(1 - u);
        draw.shift = ent * Eigen::Vector2d(2.0, 1.0 / 3.0) +
                     Eigen::Vector2d(1.0, u * (1 - u)) + Eigen::Vector2d(1.0, 1.0 / 6.0);
        return draw;
      };
      EquationSystem sys(1, 2, {self}, {sampler});
      sys.set_mean_constraint(Eigen::MatrixXd::Zero(2, 1));
      return sys;
    }
    case ModelConfig::Kind::kRrt: {
      Sampler sampler = [](SplitRng& rng) {
        const double u = rng.uniform_open();
        RawDraw draw;
        draw.matrices = {scalar1(u), scalar1(1 - u)};
        draw.shift = Eigen::VectorXd::Constant(1, rrt_toll(u));
        return draw;
      };
      EquationSystem sys(1, 1, {self}, {sampler});
      sys.set_mean_constraint(Eigen::MatrixXd::Zero(1, 1));
      return sys;
    }
    case ModelConfig::Kind::kUrnDet: {
      const UrnDetParams p = urn_det_params(config);
      auto shift = config.urn_det_shift;
      if (!shift) {
        const double center = p.mean_coeff_sum;
        const double lambda = p.lambda;
        shift = [center, lambda](const std::vector<double>& d) {
          double s = 0;
          for (double v : d) s += std::pow(v, lambda);
          return center - s;
        };
      }
      auto make_sampler = [&](int /*r*/) -> Sampler {
        const int k = p.k;
        const double alpha = p.alpha, lambda = p.lambda;
        return [k, alpha, lambda, shift](SplitRng& rng) {
          const std::vector<double> d = rng.dirichlet(alpha, k);
          RawDraw draw;
          draw.matrices.reserve(static_cast<std::size_t>(k));
          for (double v : d) draw.matrices.push_back(scalar1(std::pow(v, lambda)));
          draw.shift = Eigen::VectorXd::Constant(1, shift(d));
          return draw;
        };
      };
      // equation 1: positions 1..a+1 feed X1, the rest X2;
      // equation 2: positions 1..c feed X1, the rest X2
      const int a1 = config.urn_a + 1, c = config.urn_c;
      IndexMap map1 = [a1](int j) { return j < a1 ? 0 : 1; };
      IndexMap map2 = [c](int j) { return j < c ? 0 : 1; };
      EquationSystem sys(2, 1, {map1, map2}, {make_sampler(0), make_sampler(1)},
                         SumGuard::kFiniteTerms, std::max(64, p.k));
      sys.set_mean_constraint(Eigen::MatrixXd::Zero(1, 2));
      return sys;
    }
    case ModelConfig::Kind::kUrnRand: {
      const double lambda = config.p1 + config.p2 - 1;
      if (!(lambda > 0.5) || !(lambda < 1.0))
        throw ConfigError("urn_rand requires lambda = p1+p2-1 in (1/2, 1); got " +
                          std::to_string(lambda));
      auto shift = config.urn_rand_shift;
      if (!shift) {
        shift = [lambda](double u, int /*f*/) {
          return 2.0 / (1 + lambda) - std::pow(u, lambda) - std::pow(1 - u, lambda);
        };
      }
      auto make_sampler = [&](double pr) -> Sampler {
        return [pr, lambda, shift](SplitRng& rng) {
          const double u = rng.uniform_open();
          const int f = rng.uniform() < pr ? 1 : 0;
          RawDraw draw;
          draw.matrices = {scalar1(std::pow(u, lambda)),
                           scalar1(f * std::pow(1 - u, lambda)),
                           scalar1((1 - f) * std::pow(1 - u, lambda))};
          draw.shift = Eigen::VectorXd::Constant(1, shift(u, f));
          return draw;
        };
      };
      // terms: own equation twice, then the other equation
      IndexMap map1 = [](int j) { return j < 2 ? 0 : 1; };
      IndexMap map2 = [](int j) { return j < 2 ? 1 : 0; };
      EquationSystem sys(2, 1, {map1, map2}, {make_sampler(config.p1), make_sampler(config.p2)});
      sys.set_mean_constraint(Eigen::MatrixXd::Zero(1, 2));
      return sys;
    }
    case ModelConfig::Kind::kUrnMulti: {
      const UrnMultiParams p = urn_multi_params(config);
      ComplexSystem cs;
      cs.m = p.q;
      cs.max_terms = std::max(64, p.s + 1);
      const std::complex<double> exponent = p.lambda / static_cast<double>(p.s);
      const double alpha = 1.0 / p.s;
      for (int r = 0; r < p.q; ++r) {
        const auto targets = p.targets[static_cast<std::size_t>(r)];
        cs.index_map.push_back([targets](int j) {
          return targets[static_cast<std::size_t>(j)];
        });
        const int terms = p.s + 1;
        cs.samplers.push_back([terms, alpha, exponent](SplitRng& rng) {
          const std::vector<double> d = rng.dirichlet(alpha, terms);
          ComplexRawDraw draw;
          draw.coeffs.reserve(static_cast<std::size_t>(terms));
          for (double v : d) draw.coeffs.push_back(std::exp(exponent * std::log(v)));
          draw.shift = 0.0;
          return draw;
        });
      }
      EquationSystem sys = embed_complex(cs);
      Eigen::MatrixXd means(2, p.q);
      for (int r = 0; r < p.q; ++r) {
        means(0, r) = p.mean(r).real();
        means(1, r) = p.mean(r).imag();
      }
      sys.set_mean_constraint(means);
      return sys;
    }
    case ModelConfig::Kind::kSplit: {
      validate_split(config.split_law);
      const SplitVectorLaw law = config.split_law;
      const double mu = law.mu();
      Sampler sampler = [law, mu](SplitRng& rng) {
        const std::vector<double> v = law.sample(rng);
        RawDraw draw;
        double toll = 1;
        draw.matrices.reserve(v.size());
        for (double x : v) {
          draw.matrices.push_back(scalar1(x));
          toll += xlogx(x) / mu;
        }
        draw.shift = Eigen::VectorXd::Constant(1, toll);
        return draw;
      };
      EquationSystem sys(1, 1, {self}, {sampler}, SumGuard::kFiniteTerms,
                         std::max(64, law.b));
      sys.set_mean_constraint(Eigen::MatrixXd::Zero(1, 1));
      return sys;
    }
    case ModelConfig::Kind::kSplit2d: {
      validate_split(config.split_law);
      const SplitVectorLaw law = config.split_law;
      const double mu = law.mu();
      const double c = config.c_const.value_or(split2d_forced_c(law));
      Sampler sampler = [law, mu, c](SplitRng& rng) {
        const std::vector<double> v = law.sample(rng);
        RawDraw draw;
        double cv = 1, sum_sq = 0;
        draw.matrices.reserve(v.size());
        for (double x : v) {
          draw.matrices.push_back(split2d_matrix(x));
          cv += xlogx(x) / mu;
          sum_sq += x * x;
        }
        draw.shift = cv * Eigen::Vector2d(1, 1) + Eigen::Vector2d(c * (1 - sum_sq) - 1, 0);
        return draw;
      };
      EquationSystem sys(1, 2, {self}, {sampler}, SumGuard::kFiniteTerms,
                         std::max(64, law.b));
      sys.set_mean_constraint(Eigen::MatrixXd::Zero(2, 1));
      return sys;
    }
  }
  throw ConfigError("unknown model kind");
}

EquationSystem degenerate_variant(const ModelConfig& config) {
  if (config.kind != ModelConfig::Kind::kSplit2d)
    throw std::domain_error("degenerate_variant: only split2d has the degenerate recipe");
  if (!config.split_law.is_deterministic())
    throw std::domain_error("degenerate_variant: split vector must be deterministic");
  return build(config);
}

std::string models_help() {
  std::ostringstream out;
  out << "quicksort      m=1 d=1  X = U X' + (1-U) X'' + g(U), limit of scaled comparison counts\n"
      << "quicksort2d    m=1 d=2  joint comparisons/exchanges limit with toll g2(U)\n"
      << "rrt            m=1 d=1  recursive-tree path length limit, toll h(U)\n"
      << "urn_det        m=2 d=1  two-color urn, scheme (a,b,c,d), a+b=c+d, bc>0,\n"
      << "               lambda=(a-c)/(a+b) in (1/2,1]; K=a+b+1 Dirichlet(1/(K-1)) weights\n"
      << "urn_rand       m=2 d=1  random replacement urn, lambda=p1+p2-1 in (1/2,1)\n"
      << "urn_multi      m=q d=2  balanced q-color urn projected to a large eigenvalue\n"
      << "               lambda (Re lambda > S/2); complex limits embedded into R^2\n"
      << "split          m=1 d=1  split-tree path length; split vectors: deterministic,\n"
      << "               (U,1-U), or symmetric Dirichlet(alpha)\n"
      << "split2d        m=1 d=2  joint (Wiener index, path length) split-tree limit\n";
  return out.str();
}

}  // namespace sfpe
