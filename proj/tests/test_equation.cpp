#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "sfpe/equation.hpp"
#include "sfpe/models.hpp"
#include "sfpe/spectral.hpp"

using namespace sfpe;

TEST_CASE("min_gain and op_norm basics") {
  CHECK(min_gain(Eigen::Matrix2d::Identity()) == doctest::Approx(1.0));
  CHECK(op_norm(Eigen::Matrix2d::Identity()) == doctest::Approx(1.0));

  Eigen::Matrix2d iso = 0.3 * Eigen::Matrix2d::Identity();
  CHECK(min_gain(iso) == doctest::Approx(0.3).epsilon(1e-14));

  Eigen::Matrix2d diag;
  diag << 2, 0, 0, 0.5;
  CHECK(op_norm(diag) == doctest::Approx(2.0));
  CHECK(min_gain(diag) == doctest::Approx(0.5));

  Eigen::MatrixXd one(1, 1);
  one << -0.7;
  CHECK(min_gain(one) == doctest::Approx(0.7));
  CHECK(op_norm(one) == doctest::Approx(0.7));

  Eigen::Matrix2d bad;
  bad << 1, std::nan(""), 0, 1;
  CHECK_THROWS_AS((void)min_gain(bad), std::domain_error);
  CHECK_THROWS_AS((void)op_norm(bad), std::domain_error);
}

TEST_CASE("split2d matrix closed-form singular values at V=1/2") {
  // SVD oracle against the closed form
  Eigen::Matrix2d a;
  const double v = 0.5;
  a << v * v, v * (1 - v), 0, v;
  CHECK(min_gain(a) == doctest::Approx(0.21850801222441053).epsilon(1e-12));
  CHECK(op_norm(a) == doctest::Approx(0.57206140281768430).epsilon(1e-12));
}

TEST_CASE("min_gain <= op_norm, equality iff scaled orthogonal") {
  SplitRng rng(11);
  for (int i = 0; i < 2000; ++i) {
    Eigen::Matrix2d a;
    for (int k = 0; k < 4; ++k) a(k / 2, k % 2) = 2 * rng.uniform() - 1;
    CHECK(min_gain(a) <= op_norm(a) + 1e-14);
    // |det| = product of the two singular values
    CHECK(min_gain(a) * op_norm(a) == doctest::Approx(std::abs(a.determinant())).epsilon(1e-10));
  }
  // rotations times scale: both singular values equal the scale
  for (int i = 0; i < 500; ++i) {
    const double theta = 2 * std::numbers::pi * rng.uniform();
    const double scale = 0.1 + 2 * rng.uniform();
    Eigen::Matrix2d rot;
    rot << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    rot *= scale;
    CHECK(min_gain(rot) == doctest::Approx(scale).epsilon(1e-12));
    CHECK(op_norm(rot) == doctest::Approx(scale).epsilon(1e-12));
  }
}

TEST_CASE("embed_scalar preserves |V| as both singular values") {
  SplitRng rng(12);
  for (int i = 0; i < 10000; ++i) {
    const std::complex<double> v(2 * rng.uniform() - 1, 2 * rng.uniform() - 1);
    const Eigen::Matrix2d m = embed_scalar(v);
    CHECK(min_gain(m) == doctest::Approx(std::abs(v)).epsilon(1e-12));
    CHECK(op_norm(m) == doctest::Approx(std::abs(v)).epsilon(1e-12));
  }
  // V = i is a rotation
  const Eigen::Matrix2d rot = embed_scalar({0, 1});
  CHECK(rot(0, 1) == -1);
  CHECK(rot(1, 0) == 1);
  CHECK(min_gain(rot) == doctest::Approx(1.0));
  // |0.6 + 0.8i| = 1
  CHECK(op_norm(embed_scalar({0.6, 0.8})) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("spectral_summary") {
  CoefficientDraw draw;
  draw.alphas = {0.3, 0.7};
  draw.opnorms = {0.3, 0.7};
  SpectralSummary s = spectral_summary(draw, Interval::open(0, 1));
  CHECK(s.alpha_max == 0.7);
  CHECK(s.alpha_sec == 0.3);
  CHECK(s.n_interval == 2);

  CoefficientDraw single;
  single.alphas = {0.5};
  single.opnorms = {0.5};
  CHECK(spectral_summary(single, Interval::open(0, 1)).alpha_sec == 0);

  CoefficientDraw ones;
  ones.alphas = {1, 1};
  ones.opnorms = {1, 1};
  CHECK(spectral_summary(ones, Interval::open(0, 1)).n_interval == 0);
  CHECK(spectral_summary(ones, Interval::open_closed(0, 1)).n_interval == 2);
}

TEST_CASE("spectral_summary is permutation invariant") {
  SplitRng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    CoefficientDraw draw;
    const int terms = 1 + static_cast<int>(rng.uniform_index(6));
    for (int j = 0; j < terms; ++j) {
      const double a = rng.uniform();
      draw.alphas.push_back(a);
      draw.opnorms.push_back(a + rng.uniform() * (1 - a));
    }
    const SpectralSummary ref = spectral_summary(draw, Interval::open(0, 1));
    for (int shuffle = 0; shuffle < 5; ++shuffle) {
      CoefficientDraw perm = draw;
      for (std::size_t i = perm.alphas.size(); i > 1; --i) {
        const auto j = rng.uniform_index(i);
        std::swap(perm.alphas[i - 1], perm.alphas[j]);
        std::swap(perm.opnorms[i - 1], perm.opnorms[j]);
      }
      const SpectralSummary got = spectral_summary(perm, Interval::open(0, 1));
      CHECK(got.alpha_max == ref.alpha_max);
      CHECK(got.alpha_sec == ref.alpha_sec);
    }
  }
}

TEST_CASE("sample_draw: quicksort structure and determinism") {
  const EquationSystem sys = build(ModelConfig::quicksort());
  SplitRng rng(5);
  const CoefficientDraw draw = sample_draw(sys, 0, rng);
  REQUIRE(draw.matrices.size() == 2);
  const double u = draw.matrices[0](0, 0);
  CHECK(u > 0);
  CHECK(u < 1);
  CHECK(draw.matrices[1](0, 0) == doctest::Approx(1 - u).epsilon(1e-15));
  const double g = 2 * u * std::log(u) + 2 * (1 - u) * std::log(1 - u) + 1;
  CHECK(draw.shift(0) == doctest::Approx(g).epsilon(1e-14));

  SplitRng rng2(5);
  const CoefficientDraw again = sample_draw(sys, 0, rng2);
  CHECK(again.matrices[0](0, 0) == u);

  CHECK_THROWS_AS(sample_draw(sys, 1, rng), std::domain_error);
}

TEST_CASE("sample_draw: deterministic identity system") {
  EquationSystem::Sampler sampler = [](SplitRng&) {
    RawDraw d;
    d.matrices = {Eigen::MatrixXd::Identity(1, 1)};
    d.shift = Eigen::VectorXd::Zero(1);
    return d;
  };
  const EquationSystem sys(1, 1, {[](int) { return 0; }}, {sampler});
  SplitRng rng(1);
  const CoefficientDraw d = sample_draw(sys, 0, rng);
  CHECK(d.alphas == std::vector<double>{1.0});
  CHECK(d.opnorms == std::vector<double>{1.0});
  CHECK(d.shift(0) == 0);
}

TEST_CASE("sample_draw: split shift vanishes at the deterministic half split") {
  const EquationSystem sys =
      build(ModelConfig::split(SplitVectorLaw::deterministic({0.5, 0.5})));
  SplitRng rng(2);
  const CoefficientDraw d = sample_draw(sys, 0, rng);
  CHECK(d.shift(0) == doctest::Approx(0.0).scale(1).epsilon(1e-14));
}

TEST_CASE("embed_complex wraps a complex system into d=2") {
  ComplexSystem cs;
  cs.m = 1;
  cs.index_map = {[](int) { return 0; }};
  cs.samplers = {[](SplitRng&) {
    ComplexRawDraw d;
    d.coeffs = {{0.5, 0.0}};
    d.shift = {1.0, -2.0};
    return d;
  }};
  const EquationSystem sys = embed_complex(cs);
  CHECK(sys.d() == 2);
  SplitRng rng(1);
  const CoefficientDraw d = sample_draw(sys, 0, rng);
  CHECK(d.alphas[0] == doctest::Approx(0.5));
  CHECK(d.opnorms[0] == doctest::Approx(0.5));
  CHECK(d.shift(0) == 1.0);
  CHECK(d.shift(1) == -2.0);
}
