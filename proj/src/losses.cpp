#include "tsdapt/losses.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <limits>
#include <numeric>

#include "tsdapt/errors.hpp"
#include "tsdapt/ops.hpp"

namespace tsdapt {

namespace {

constexpr std::pair<Method, std::string_view> kMethodNames[] = {
    {Method::no_adaptation, "no_adaptation"}, {Method::codats, "codats"},
    {Method::codats_ws, "codats_ws"},         {Method::calda, "calda"},
    {Method::calda_ws, "calda_ws"},           {Method::train_on_target, "train_on_target"},
};

}  // namespace

std::string_view to_string(Method method) {
  for (const auto& [m, name] : kMethodNames) {
    if (m == method) return name;
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (const auto& [m, n] : kMethodNames) {
    if (n == name) return m;
  }
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

bool uses_adversary(Method m) {
  return m == Method::codats || m == Method::codats_ws || m == Method::calda ||
         m == Method::calda_ws;
}
bool uses_contrastive(Method m) { return m == Method::calda || m == Method::calda_ws; }
bool uses_weak_supervision(Method m) { return m == Method::codats_ws || m == Method::calda_ws; }

LabelProportions::LabelProportions(std::vector<double> masses) {
  if (masses.empty()) throw ConfigError("label proportions: empty distribution");
  double total = 0.0;
  for (double p : masses) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw ConfigError("label proportions: entries must be finite and >= 0");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("label proportions: entries sum to " + std::to_string(total) + ", not 1");
  }
  values_ = Array::vector(std::move(masses));
}

void LossWeights::validate() const {
  if (!(adversarial >= 0.0) || !(contrastive >= 0.0) || !(weak_supervision >= 0.0)) {
    throw ConfigError("loss weights must be >= 0");
  }
  if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
}

Var task_loss(const Var& predictions, std::span<const int> labels) {
  if (predictions.shape().size() != 2) {
    throw ShapeError("task_loss: expected [B x L] predictions, got " +
                     shape_string(predictions.shape()));
  }
  return mean(cross_entropy(predictions, labels));
}

Var domain_adversarial_loss(const Var& domain_predictions, std::span<const int> domain_labels) {
  if (domain_predictions.shape().size() != 2) {
    throw ShapeError("domain_adversarial_loss: expected [B x (n+1)] predictions, got " +
                     shape_string(domain_predictions.shape()));
  }
  const int target = static_cast<int>(domain_predictions.shape()[1]) - 1;
  if (std::find(domain_labels.begin(), domain_labels.end(), target) == domain_labels.end()) {
    throw std::invalid_argument("domain_adversarial_loss: batch has no target-domain rows");
  }
  return mean(cross_entropy(domain_predictions, domain_labels));
}

std::vector<ContrastiveSet> build_contrastive_sets(std::span<const int> labels,
                                                   std::span<const int> domains) {
  if (labels.size() != domains.size()) {
    throw ShapeError("build_contrastive_sets: " + std::to_string(labels.size()) + " labels but " +
                     std::to_string(domains.size()) + " domains");
  }
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return domains[a] < domains[b]; });

  std::vector<ContrastiveSet> sets;
  for (std::size_t q : order) {
    ContrastiveSet s{q, labels[q], domains[q], {}, {}};
    for (std::size_t k = 0; k < labels.size(); ++k) {
      if (k == q) continue;
      (labels[k] == labels[q] ? s.positives : s.negatives).push_back(k);
    }
    if (!s.positives.empty()) sets.push_back(std::move(s));
  }
  return sets;
}

double info_nce_from_similarities(std::span<const double> positive_sims,
                                  std::span<const double> negative_sims, double temperature,
                                  std::span<double> d_positive, std::span<double> d_negative) {
  if (positive_sims.empty()) throw std::invalid_argument("info_nce: empty positive set");
  if (!(temperature > 0.0)) throw std::invalid_argument("info_nce: temperature must be > 0");
  const bool want_grad = !d_positive.empty();
  const double inv_t = 1.0 / temperature;

  double peak = -std::numeric_limits<double>::infinity();
  for (double s : positive_sims) peak = std::max(peak, s * inv_t);
  for (double s : negative_sims) peak = std::max(peak, s * inv_t);

  double negative_mass = 0.0;
  for (double s : negative_sims) negative_mass += std::exp(s * inv_t - peak);

  if (want_grad) {
    std::fill(d_positive.begin(), d_positive.end(), 0.0);
    std::fill(d_negative.begin(), d_negative.end(), 0.0);
  }
  const double inv_p = 1.0 / static_cast<double>(positive_sims.size());
  double total = 0.0;
  for (std::size_t p = 0; p < positive_sims.size(); ++p) {
    const double own = std::exp(positive_sims[p] * inv_t - peak);
    const double denominator = own + negative_mass;
    total += -(positive_sims[p] * inv_t - peak) + std::log(denominator);
    if (want_grad) {
      d_positive[p] += inv_p * inv_t * (own / denominator - 1.0);
      for (std::size_t n = 0; n < negative_sims.size(); ++n) {
        d_negative[n] += inv_p * inv_t * std::exp(negative_sims[n] * inv_t - peak) / denominator;
      }
    }
  }
  return total * inv_p;
}

double info_nce(const Array& query, std::span<const Array> positives,
                std::span<const Array> negatives, double temperature) {
  auto sim = [&query](const Array& other) {
    return cosine_similarity(constant(query), constant(other)).value().item();
  };
  std::vector<double> pos;
  std::vector<double> neg;
  for (const Array& z : positives) pos.push_back(sim(z));
  for (const Array& z : negatives) neg.push_back(sim(z));
  return info_nce_from_similarities(pos, neg, temperature);
}

namespace {

// Per-query weights 1/|Q_i| so that the objective is a sum of per-domain means.
std::vector<double> query_weights(const std::vector<ContrastiveSet>& sets) {
  std::map<int, std::size_t> per_domain;
  for (const auto& s : sets) ++per_domain[s.domain];
  std::vector<double> w;
  w.reserve(sets.size());
  for (const auto& s : sets) w.push_back(1.0 / static_cast<double>(per_domain[s.domain]));
  return w;
}

std::vector<double> gather(const Array& similarity, std::size_t q,
                           const std::vector<std::size_t>& idx) {
  std::vector<double> out;
  out.reserve(idx.size());
  for (std::size_t k : idx) out.push_back(similarity.at(q, k));
  return out;
}

double objective_from_similarity(const Array& similarity, const std::vector<ContrastiveSet>& sets,
                                 double temperature, Array* d_similarity) {
  const std::vector<double> weights = query_weights(sets);
  double total = 0.0;
  std::vector<double> dp;
  std::vector<double> dn;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const auto& s = sets[i];
    const auto pos = gather(similarity, s.query, s.positives);
    const auto neg = gather(similarity, s.query, s.negatives);
    if (d_similarity) {
      dp.assign(pos.size(), 0.0);
      dn.assign(neg.size(), 0.0);
      total += weights[i] * info_nce_from_similarities(pos, neg, temperature, dp, dn);
      for (std::size_t k = 0; k < pos.size(); ++k) d_similarity->at(s.query, s.positives[k]) += weights[i] * dp[k];
      for (std::size_t k = 0; k < neg.size(); ++k) d_similarity->at(s.query, s.negatives[k]) += weights[i] * dn[k];
    } else {
      total += weights[i] * info_nce_from_similarities(pos, neg, temperature);
    }
  }
  return total;
}

}  // namespace

double contrastive_objective(const Array& embeddings, const std::vector<ContrastiveSet>& sets,
                             double temperature) {
  if (sets.empty()) {
    warn("contrastive objective: every query skipped (no positives); contributing 0");
    return 0.0;
  }
  const Array similarity = pairwise_cosine(constant(embeddings)).value();
  return objective_from_similarity(similarity, sets, temperature, nullptr);
}

Var contrastive_loss(const Var& embeddings, const std::vector<ContrastiveSet>& sets,
                     double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("contrastive_loss: temperature must be > 0");
  if (sets.empty()) {
    warn("contrastive objective: every query skipped (no positives); contributing 0");
    return constant(Array::scalar(0.0));
  }
  Var similarity = pairwise_cosine(embeddings);
  Array d_sim(similarity.shape());
  const double value = objective_from_similarity(similarity.value(), sets, temperature, &d_sim);
  return Var::make(Array::scalar(value), {similarity},
                   [d_sim = std::move(d_sim)](const Array& g, std::span<Array* const> grads) {
                     if (!grads[0]) return;
                     for (std::size_t i = 0; i < d_sim.size(); ++i) (*grads[0])[i] += g[0] * d_sim[i];
                   },
                   "contrastive_loss");
}

Var weak_supervision_loss(const Var& target_predictions, const LabelProportions& proportions) {
  return kl_to_batch_mean(target_predictions, proportions.values());
}

Var total_loss(const LossComponents& c, const LossWeights& weights, Method method) {
  weights.validate();
  auto need = [](const std::optional<Var>& v, const char* name) -> const Var& {
    if (!v || !*v) throw std::invalid_argument(std::string("total_loss: missing ") + name + " component");
    return *v;
  };
  Var total = need(c.task, "task");
  if (uses_adversary(method)) total = add(total, need(c.domain, "domain"));
  if (uses_contrastive(method)) {
    total = add(total, scale(need(c.contrastive, "contrastive"), weights.contrastive));
  }
  if (uses_weak_supervision(method)) {
    total = add(total, scale(need(c.weak_supervision, "weak_supervision"), weights.weak_supervision));
  }
  return total;
}

}  // namespace tsdapt
