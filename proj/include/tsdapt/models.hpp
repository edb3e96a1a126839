#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tsdapt/autodiff.hpp"

namespace tsdapt {

/// Network dimensions. The feature extractor is a stack of same-padded
/// conv + ReLU blocks followed by global average pooling, so its output width
/// is `filters.back()` for any input length.
struct ArchitectureConfig {
  std::size_t channels = 0;
  std::size_t num_classes = 0;
  std::size_t num_sources = 1;
  std::vector<std::size_t> filters{128, 256, 128};
  std::vector<std::size_t> widths{8, 5, 3};
  std::size_t domain_hidden = 128;
  std::size_t contrastive_dim = 128;

  std::size_t feature_dim() const { return filters.empty() ? 0 : filters.back(); }
  /// n sources plus the target, which is always encoded as index n.
  std::size_t num_domains() const { return num_sources + 1; }
  std::size_t target_domain() const { return num_sources; }
  std::size_t min_length() const;
  void validate() const;

  friend bool operator==(const ArchitectureConfig&, const ArchitectureConfig&) = default;
};

template <class T>
struct ConvLayer {
  T kernels;  // [F x C x W]
  T bias;     // [F]

  friend bool operator==(const ConvLayer&, const ConvLayer&) = default;
};

template <class T>
struct DenseLayer {
  T weights;  // [out x in]
  T bias;     // [out]

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

template <class T>
struct FeatureExtractor {
  std::vector<ConvLayer<T>> blocks;

  friend bool operator==(const FeatureExtractor&, const FeatureExtractor&) = default;
};

template <class T>
struct TaskClassifier {
  DenseLayer<T> output;

  friend bool operator==(const TaskClassifier&, const TaskClassifier&) = default;
};

template <class T>
struct DomainClassifier {
  DenseLayer<T> hidden;
  DenseLayer<T> output;

  friend bool operator==(const DomainClassifier&, const DomainClassifier&) = default;
};

template <class T>
struct ContrastiveHead {
  DenseLayer<T> projection;

  friend bool operator==(const ContrastiveHead&, const ContrastiveHead&) = default;
};

/// The four network components, holding either raw arrays (`T = Array`) or
/// graph leaves bound for one forward/backward pass (`T = Var`).
template <class T>
struct Parameters {
  FeatureExtractor<T> feature;
  TaskClassifier<T> task;
  DomainClassifier<T> domain;
  ContrastiveHead<T> contrastive;

  friend bool operator==(const Parameters&, const Parameters&) = default;

  /// Visits every tensor as f(name, tensor) in a fixed order.
  template <class F>
  void for_each(F&& f) {
    visit(*this, f);
  }
  template <class F>
  void for_each(F&& f) const {
    visit(*this, f);
  }

 private:
  template <class Self, class F>
  static void visit(Self& self, F& f) {
    for (std::size_t i = 0; i < self.feature.blocks.size(); ++i) {
      const std::string prefix = "feature.conv" + std::to_string(i);
      f(prefix + ".kernels", self.feature.blocks[i].kernels);
      f(prefix + ".bias", self.feature.blocks[i].bias);
    }
    f(std::string("task.output.weights"), self.task.output.weights);
    f(std::string("task.output.bias"), self.task.output.bias);
    f(std::string("domain.hidden.weights"), self.domain.hidden.weights);
    f(std::string("domain.hidden.bias"), self.domain.hidden.bias);
    f(std::string("domain.output.weights"), self.domain.output.weights);
    f(std::string("domain.output.bias"), self.domain.output.bias);
    f(std::string("contrastive.projection.weights"), self.contrastive.projection.weights);
    f(std::string("contrastive.projection.bias"), self.contrastive.projection.bias);
  }
};

struct ModelParameters {
  ArchitectureConfig arch;
  Parameters<Array> values;

  friend bool operator==(const ModelParameters&, const ModelParameters&) = default;
};

using BoundParameters = Parameters<Var>;

/// Seeded initialization: weights uniform in +-sqrt(6/fan_in) ahead of a
/// ReLU and +-sqrt(3/fan_in) otherwise; biases zero.
ModelParameters init_parameters(const ArchitectureConfig& arch, std::uint64_t seed);

/// Wraps every array as a graph leaf (trainable or constant).
BoundParameters bind(const Parameters<Array>& params, bool trainable);

/// Collects pointers to every array in `for_each` order.
std::vector<Array*> parameter_list(Parameters<Array>& params);

/// [K x H] -> [D] or [B x K x H] -> [B x D].
Var feature_extractor_forward(const FeatureExtractor<Var>& params, const Var& windows);
/// Softmax class probabilities.
Var task_classifier_forward(const TaskClassifier<Var>& params, const Var& features);
/// Softmax domain probabilities behind a gradient reversal layer.
Var domain_classifier_forward(const DomainClassifier<Var>& params, const Var& features,
                              double lambda);
Var contrastive_head_forward(const ContrastiveHead<Var>& params, const Var& features);

/// Adversarial weight schedule 2/(1+exp(-10p)) - 1 for progress p in [0, 1].
double reversal_schedule(double progress);

}  // namespace tsdapt
