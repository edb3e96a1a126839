#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "../support/model_paths.hpp"
#include "../support/oracles.hpp"
#include "tsdapt/errors.hpp"
#include "tsdapt/models.hpp"
#include "tsdapt/ops.hpp"

namespace tsdapt {
namespace {

using oracle::random_array;
using testing::random_model;
using testing::smooth_case;
using testing::tiny_architecture;

ArchitectureConfig default_architecture() {
  ArchitectureConfig a;
  a.channels = 3;
  a.num_classes = 4;
  a.num_sources = 2;
  return a;
}

TEST(InitParameters, SeedDeterminesValues) {
  const auto arch = tiny_architecture();
  EXPECT_EQ(init_parameters(arch, 5), init_parameters(arch, 5));
  EXPECT_NE(init_parameters(arch, 5), init_parameters(arch, 6));
}

TEST(InitParameters, BiasesStartAtZeroAndWeightsInRange) {
  const auto m = init_parameters(default_architecture(), 3);
  m.values.for_each([](const std::string& name, const Array& a) {
    if (name.ends_with(".bias")) {
      for (double v : a.data()) EXPECT_EQ(v, 0.0) << name;
    } else {
      const std::size_t fan_in = a.size() / a.dim(0);
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      for (double v : a.data()) EXPECT_LE(std::abs(v), bound) << name;
    }
  });
}

TEST(InitParameters, DefaultShapes) {
  const auto m = init_parameters(default_architecture(), 0);
  const auto& f = m.values.feature.blocks;
  ASSERT_EQ(f.size(), 3u);
  EXPECT_EQ(f[0].kernels.shape(), (Shape{128, 3, 8}));
  EXPECT_EQ(f[1].kernels.shape(), (Shape{256, 128, 5}));
  EXPECT_EQ(f[2].kernels.shape(), (Shape{128, 256, 3}));
  EXPECT_EQ(m.values.task.output.weights.shape(), (Shape{4, 128}));
  EXPECT_EQ(m.values.domain.hidden.weights.shape(), (Shape{128, 128}));
  EXPECT_EQ(m.values.domain.output.weights.shape(), (Shape{3, 128}));
  EXPECT_EQ(m.values.contrastive.projection.weights.shape(), (Shape{128, 128}));
}

TEST(InitParameters, RejectsInvalidDimensions) {
  auto a = tiny_architecture();
  a.num_classes = 1;
  EXPECT_THROW(init_parameters(a, 0), ConfigError);
  a = tiny_architecture();
  a.channels = 0;
  EXPECT_THROW(init_parameters(a, 0), ConfigError);
  a = tiny_architecture();
  a.num_sources = 0;
  EXPECT_THROW(init_parameters(a, 0), ConfigError);
}

TEST(FeatureExtractor, OutputWidthIndependentOfLength) {
  auto arch = default_architecture();
  arch.filters = {8, 16, 128};
  const auto m = init_parameters(arch, 1);
  const auto b = bind(m.values, false);
  std::mt19937_64 rng(2);
  for (std::size_t h : {64u, 128u, 256u}) {
    const Var out = feature_extractor_forward(b.feature, constant(random_array({3, h}, rng)));
    EXPECT_EQ(out.shape(), (Shape{128}));
  }
}

TEST(FeatureExtractor, MatchesManualComposition) {
  std::mt19937_64 rng(3);
  const auto m = random_model(tiny_architecture(), rng);
  const Array x = random_array({2, 12}, rng);
  Array h = x;
  for (const auto& block : m.values.feature.blocks) {
    h = oracle::naive_conv1d(h, block.kernels, block.bias, true);
    for (double& v : h.data()) v = std::max(v, 0.0);
  }
  std::vector<double> pooled(h.dim(0), 0.0);
  for (std::size_t f = 0; f < h.dim(0); ++f) {
    for (std::size_t t = 0; t < h.dim(1); ++t) pooled[f] += h.at(f, t);
    pooled[f] /= static_cast<double>(h.dim(1));
  }
  const Var out = feature_extractor_forward(bind(m.values, false).feature, constant(x));
  EXPECT_LT(oracle::max_abs_diff(out.value(), Array::vector(pooled)), 1e-12);
}

TEST(FeatureExtractor, ZeroInputZeroBiasGivesZero) {
  const auto m = init_parameters(tiny_architecture(), 4);
  const Var out = feature_extractor_forward(bind(m.values, false).feature, constant(Array(Shape{2, 16})));
  for (double v : out.value().data()) EXPECT_EQ(v, 0.0);
}

TEST(FeatureExtractor, RejectsMismatchedInput) {
  auto arch = default_architecture();
  arch.filters = {4, 4, 4};
  const auto b = bind(init_parameters(arch, 0).values, false);
  EXPECT_THROW(feature_extractor_forward(b.feature, constant(Array(Shape{2, 64}))), ShapeError);
  EXPECT_THROW(feature_extractor_forward(b.feature, constant(Array(Shape{3, 7}))), ShapeError);
  EXPECT_NO_THROW(feature_extractor_forward(b.feature, constant(Array(Shape{3, 8}))));
}

TEST(FeatureExtractor, BatchedEqualsPerWindow) {
  std::mt19937_64 rng(5);
  const auto m = random_model(tiny_architecture(), rng);
  const auto b = bind(m.values, false);
  const Array x = random_array({3, 2, 9}, rng);
  const Var batched = feature_extractor_forward(b.feature, constant(x));
  for (std::size_t i = 0; i < 3; ++i) {
    const Array one(Shape{2, 9}, std::vector<double>(x.data().begin() + i * 18, x.data().begin() + (i + 1) * 18));
    const Var single = feature_extractor_forward(b.feature, constant(one));
    for (std::size_t f = 0; f < 2; ++f) EXPECT_EQ(batched.value().at(i, f), single.value()[f]);
  }
}

TEST(TaskClassifier, MatchesDenseSoftmaxOracle) {
  std::mt19937_64 rng(6);
  const auto m = random_model(tiny_architecture(), rng);
  const Array feats = random_array({5, 2}, rng);
  const Var p = task_classifier_forward(bind(m.values, false).task, constant(feats));
  const auto& w = m.values.task.output;
  for (std::size_t i = 0; i < 5; ++i) {
    const Array row = Array::vector({feats.at(i, 0), feats.at(i, 1)});
    const Array expect = oracle::naive_softmax(oracle::naive_dense(row, w.weights, w.bias));
    double total = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      EXPECT_NEAR(p.value().at(i, c), expect[c], 1e-12);
      total += p.value().at(i, c);
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(TaskClassifier, IdentityWeightsGiveSoftmaxOfFeatures) {
  auto arch = tiny_architecture();
  arch.filters = {3, 4, 3};
  auto m = init_parameters(arch, 0);
  m.values.task.output.weights = Array(Shape{3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const Array feats = Array::vector({0.3, -1.2, 2.0});
  const Var p = task_classifier_forward(bind(m.values, false).task, constant(feats));
  EXPECT_LT(oracle::max_abs_diff(p.value(), oracle::naive_softmax(feats)), 1e-15);
}

TEST(DomainClassifier, LambdaDoesNotChangeForward) {
  std::mt19937_64 rng(7);
  const auto m = random_model(tiny_architecture(), rng);
  const auto b = bind(m.values, false);
  const Var feats = constant(random_array({4, 2}, rng));
  const Var p0 = domain_classifier_forward(b.domain, feats, 0.0);
  const Var p1 = domain_classifier_forward(b.domain, feats, 1.0);
  EXPECT_EQ(p0.value(), p1.value());
  EXPECT_EQ(p0.shape(), (Shape{4, 3}));
  for (std::size_t i = 0; i < 4; ++i) {
    double total = 0.0;
    for (double v : p0.value().row(i)) total += v;
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(DomainClassifier, MatchesCompositionOracle) {
  std::mt19937_64 rng(8);
  const auto m = random_model(tiny_architecture(), rng);
  const Array feats = random_array({2}, rng);
  const auto& d = m.values.domain;
  Array h = oracle::naive_dense(feats, d.hidden.weights, d.hidden.bias);
  for (double& v : h.data()) v = std::max(v, 0.0);
  const Array expect = oracle::naive_softmax(oracle::naive_dense(h, d.output.weights, d.output.bias));
  const Var p = domain_classifier_forward(bind(m.values, false).domain, constant(feats), 0.5);
  EXPECT_LT(oracle::max_abs_diff(p.value(), expect), 1e-12);
}

TEST(ContrastiveHead, IdentityWeightsPassFeaturesThrough) {
  auto arch = tiny_architecture();
  arch.contrastive_dim = 2;
  auto m = init_parameters(arch, 0);
  m.values.contrastive.projection.weights = Array(Shape{2, 2}, {1, 0, 0, 1});
  const Array feats = Array::vector({0.7, -0.1});
  const Var z = contrastive_head_forward(bind(m.values, false).contrastive, constant(feats));
  EXPECT_EQ(z.value(), feats);
}

TEST(ContrastiveHead, MatchesDenseOracle) {
  std::mt19937_64 rng(9);
  const auto m = random_model(default_architecture(), rng);
  const Array feats = random_array({128}, rng);
  const auto& p = m.values.contrastive.projection;
  const Var z = contrastive_head_forward(bind(m.values, false).contrastive, constant(feats));
  EXPECT_EQ(z.shape(), (Shape{128}));
  EXPECT_LT(oracle::max_abs_diff(z.value(), oracle::naive_dense(feats, p.weights, p.bias)), 1e-12);
}

// The feature extractor receives -lambda times the gradient it would get if
// the reversal layer were the identity.
TEST(GradientReversal, FeatureGradientIsNegatedAndScaled) {
  std::mt19937_64 rng(10);
  const auto m = random_model(tiny_architecture(), rng);
  const Array x = random_array({4, 2, 10}, rng);
  const std::vector<int> domains{0, 1, 2, 2};
  const double lambda = 0.37;

  auto run = [&](bool reversed) {
    const BoundParameters b = bind(m.values, true);
    const Var feats = feature_extractor_forward(b.feature, constant(x));
    const Var input = reversed ? gradient_reversal(feats, lambda) : feats;
    const auto& d = b.domain;
    const Var p = softmax(dense(relu(dense(input, d.hidden.weights, d.hidden.bias)), d.output.weights,
                                d.output.bias));
    const Gradients g = backward(domain_adversarial_loss(p, domains));
    std::vector<Array> out;
    for (const auto& block : b.feature.blocks) {
      out.push_back(g.at(block.kernels));
      out.push_back(g.at(block.bias));
    }
    out.push_back(g.at(d.hidden.weights));
    return out;
  };
  const auto with_r = run(true);
  const auto identity = run(false);
  for (std::size_t k = 0; k + 1 < with_r.size(); ++k) {
    for (std::size_t i = 0; i < with_r[k].size(); ++i) {
      EXPECT_NEAR(with_r[k][i], -lambda * identity[k][i], 1e-12);
    }
  }
  // Domain classifier parameters see the ordinary gradient.
  EXPECT_EQ(with_r.back(), identity.back());
}

TEST(ReversalSchedule, RampsFromZeroTowardOne) {
  EXPECT_EQ(reversal_schedule(0.0), 0.0);
  EXPECT_NEAR(reversal_schedule(1.0), 2.0 / (1.0 + std::exp(-10.0)) - 1.0, 1e-15);
  double prev = -1.0;
  for (int i = 0; i <= 20; ++i) {
    const double v = reversal_schedule(i / 20.0);
    EXPECT_GT(v, prev);
    prev = v;
  }
}

class ComposedPathGradients : public ::testing::TestWithParam<int> {};

TEST_P(ComposedPathGradients, TaskPathMatchesFiniteDifferences) {
  std::mt19937_64 rng(1000 + GetParam());
  const auto [m, x] = smooth_case(tiny_architecture(), {3, 2, 8}, rng);
  const std::vector<int> labels{static_cast<int>(rng() % 3), static_cast<int>(rng() % 3),
                                static_cast<int>(rng() % 3)};
  const double err = testing::path_gradient_error(
      m, x, [&](const std::vector<Var>& v) { return testing::task_path(m, v, labels); });
  EXPECT_LT(err, 1e-4);
}

TEST_P(ComposedPathGradients, AdversarialPathMatchesFiniteDifferences) {
  std::mt19937_64 rng(2000 + GetParam());
  const auto [m, x] = smooth_case(tiny_architecture(), {3, 2, 8}, rng);
  const std::vector<int> domains{0, 1, 2};
  const double lambda = std::uniform_real_distribution<double>(0.1, 1.5)(rng);
  const double err = testing::path_gradient_error(
      m, x, [&](const std::vector<Var>& v) { return testing::domain_path(m, v, domains, lambda); },
      -lambda);
  EXPECT_LT(err, 1e-4);
}

INSTANTIATE_TEST_SUITE_P(RandomCases, ComposedPathGradients, ::testing::Range(0, 20));

}  // namespace
}  // namespace tsdapt
