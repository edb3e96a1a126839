#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tsdapt/autodiff.hpp"

namespace tsdapt {

enum class Method { no_adaptation, codats, codats_ws, calda, calda_ws, train_on_target };

std::string_view to_string(Method method);
Method parse_method(std::string_view name);
bool uses_adversary(Method method);
bool uses_contrastive(Method method);
bool uses_weak_supervision(Method method);

/// Discrete label distribution: non-negative entries summing to 1 (+-1e-9).
class LabelProportions {
 public:
  explicit LabelProportions(std::vector<double> masses);
  const Array& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

 private:
  Array values_;
};

struct LossWeights {
  double adversarial = 1.0;  // peak gradient-reversal coefficient
  double contrastive = 0.1;
  double weak_supervision = 1.0;
  double temperature = 0.1;

  void validate() const;
};

/// Mean cross-entropy of class predictions [B x L].
Var task_loss(const Var& predictions, std::span<const int> labels);

/// Mean cross-entropy of domain predictions [B x (n+1)] over source and
/// target rows. The last column is the target; at least one target row is
/// required.
Var domain_adversarial_loss(const Var& domain_predictions, std::span<const int> domain_labels);

/// One query of the supervised contrastive objective. Indices refer to rows of
/// the batch the sets were built from.
struct ContrastiveSet {
  std::size_t query = 0;
  int label = 0;
  int domain = 0;
  std::vector<std::size_t> positives;  // same label, query itself excluded
  std::vector<std::size_t> negatives;  // different label

  friend bool operator==(const ContrastiveSet&, const ContrastiveSet&) = default;
};

/// Builds query/positive/negative sets over a batch of source examples.
/// Positives and negatives are drawn from every source domain; queries with
/// no positive are skipped. Output is ordered by (domain, query index).
std::vector<ContrastiveSet> build_contrastive_sets(std::span<const int> labels,
                                                   std::span<const int> domains);

/// Supervised InfoNCE for one query, log-sum-exp stabilized.
double info_nce(const Array& query, std::span<const Array> positives,
                std::span<const Array> negatives, double temperature);

/// InfoNCE evaluated from precomputed similarities. When the gradient spans
/// are non-empty they receive d loss / d similarity (overwritten).
double info_nce_from_similarities(std::span<const double> positive_sims,
                                  std::span<const double> negative_sims, double temperature,
                                  std::span<double> d_positive = {},
                                  std::span<double> d_negative = {});

/// Sum over source domains of the mean InfoNCE of that domain's queries.
/// `embeddings` is [B x d]. Returns 0 with a warning when `sets` is empty.
double contrastive_objective(const Array& embeddings, const std::vector<ContrastiveSet>& sets,
                             double temperature);

/// Differentiable form of contrastive_objective.
Var contrastive_loss(const Var& embeddings, const std::vector<ContrastiveSet>& sets,
                     double temperature);

/// KL(proportions || mean predicted distribution over target rows).
Var weak_supervision_loss(const Var& target_predictions, const LabelProportions& proportions);

struct LossComponents {
  std::optional<Var> task;
  std::optional<Var> domain;
  std::optional<Var> contrastive;
  std::optional<Var> weak_supervision;
};

/// Weighted objective for `method`:
///   no_adaptation / train_on_target: task
///   codats: task + domain            calda: task + domain + w_c * contrastive
///   *_ws: adds w_ws * weak_supervision
/// Gradient reversal strength is applied inside the domain classifier, not here.
Var total_loss(const LossComponents& components, const LossWeights& weights, Method method);

}  // namespace tsdapt
