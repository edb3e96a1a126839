#include "tsdapt/models.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tsdapt/errors.hpp"
#include "tsdapt/ops.hpp"

namespace tsdapt {

std::size_t ArchitectureConfig::min_length() const {
  return widths.empty() ? 1 : *std::max_element(widths.begin(), widths.end());
}

void ArchitectureConfig::validate() const {
  if (channels < 1) throw ConfigError("architecture: channel count must be >= 1");
  if (num_classes < 2) throw ConfigError("architecture: need at least 2 classes");
  if (num_sources < 1) throw ConfigError("architecture: need at least 1 source domain");
  if (filters.empty() || filters.size() != widths.size()) {
    throw ConfigError("architecture: filters and widths must be non-empty and equal length");
  }
  for (std::size_t i = 0; i < filters.size(); ++i) {
    if (filters[i] == 0 || widths[i] == 0) {
      throw ConfigError("architecture: zero filter count or kernel width");
    }
  }
  if (domain_hidden == 0 || contrastive_dim == 0) {
    throw ConfigError("architecture: zero head width");
  }
}

namespace {

Array uniform_array(Shape shape, double limit, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  Array a(std::move(shape));
  for (double& v : a.data()) v = dist(rng);
  return a;
}

DenseLayer<Array> dense_layer(std::size_t in, std::size_t out, bool before_relu,
                              std::mt19937_64& rng) {
  const double gain = before_relu ? 6.0 : 3.0;
  return {uniform_array({out, in}, std::sqrt(gain / static_cast<double>(in)), rng),
          Array(Shape{out})};
}

}  // namespace

ModelParameters init_parameters(const ArchitectureConfig& arch, std::uint64_t seed) {
  arch.validate();
  std::mt19937_64 rng(seed);
  ModelParameters model{arch, {}};
  auto& p = model.values;
  std::size_t in_channels = arch.channels;
  for (std::size_t i = 0; i < arch.filters.size(); ++i) {
    const std::size_t fan_in = in_channels * arch.widths[i];
    p.feature.blocks.push_back(
        {uniform_array({arch.filters[i], in_channels, arch.widths[i]},
                       std::sqrt(6.0 / static_cast<double>(fan_in)), rng),
         Array(Shape{arch.filters[i]})});
    in_channels = arch.filters[i];
  }
  const std::size_t d = arch.feature_dim();
  p.task.output = dense_layer(d, arch.num_classes, false, rng);
  p.domain.hidden = dense_layer(d, arch.domain_hidden, true, rng);
  p.domain.output = dense_layer(arch.domain_hidden, arch.num_domains(), false, rng);
  p.contrastive.projection = dense_layer(d, arch.contrastive_dim, false, rng);
  return model;
}

BoundParameters bind(const Parameters<Array>& params, bool trainable) {
  auto leaf = [trainable](const Array& a) { return trainable ? parameter(a) : constant(a); };
  BoundParameters out;
  for (const auto& block : params.feature.blocks) {
    out.feature.blocks.push_back({leaf(block.kernels), leaf(block.bias)});
  }
  out.task.output = {leaf(params.task.output.weights), leaf(params.task.output.bias)};
  out.domain.hidden = {leaf(params.domain.hidden.weights), leaf(params.domain.hidden.bias)};
  out.domain.output = {leaf(params.domain.output.weights), leaf(params.domain.output.bias)};
  out.contrastive.projection = {leaf(params.contrastive.projection.weights),
                                leaf(params.contrastive.projection.bias)};
  return out;
}

std::vector<Array*> parameter_list(Parameters<Array>& params) {
  std::vector<Array*> out;
  params.for_each([&out](const std::string&, Array& a) { out.push_back(&a); });
  return out;
}

Var feature_extractor_forward(const FeatureExtractor<Var>& params, const Var& windows) {
  if (params.blocks.empty()) throw ConfigError("feature extractor has no blocks");
  const Shape& s = windows.shape();
  if (s.size() != 2 && s.size() != 3) {
    throw ShapeError("feature extractor: expected [K x H] or [B x K x H], got " + shape_string(s));
  }
  const std::size_t channels = s[s.size() - 2];
  const std::size_t length = s.back();
  const std::size_t expected = params.blocks.front().kernels.shape()[1];
  if (channels != expected) {
    throw ShapeError("feature extractor: expected " + std::to_string(expected) +
                     " channels, got " + std::to_string(channels));
  }
  std::size_t widest = 0;
  for (const auto& b : params.blocks) widest = std::max(widest, b.kernels.shape()[2]);
  if (length < widest) {
    throw ShapeError("feature extractor: window length " + std::to_string(length) +
                     " shorter than widest kernel " + std::to_string(widest));
  }
  Var h = windows;
  for (const auto& block : params.blocks) {
    h = relu(conv1d(h, block.kernels, block.bias, Padding::same));
  }
  return global_average_pool(h);
}

Var task_classifier_forward(const TaskClassifier<Var>& params, const Var& features) {
  return softmax(dense(features, params.output.weights, params.output.bias));
}

Var domain_classifier_forward(const DomainClassifier<Var>& params, const Var& features,
                              double lambda) {
  Var reversed = gradient_reversal(features, lambda);
  Var hidden = relu(dense(reversed, params.hidden.weights, params.hidden.bias));
  return softmax(dense(hidden, params.output.weights, params.output.bias));
}

Var contrastive_head_forward(const ContrastiveHead<Var>& params, const Var& features) {
  return dense(features, params.projection.weights, params.projection.bias);
}

double reversal_schedule(double progress) {
  const double p = std::clamp(progress, 0.0, 1.0);
  return 2.0 / (1.0 + std::exp(-10.0 * p)) - 1.0;
}

}  // namespace tsdapt
