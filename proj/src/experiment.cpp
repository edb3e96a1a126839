#include "tsdapt/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iostream>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "tsdapt/errors.hpp"
#include "tsdapt/metrics.hpp"
#include "tsdapt/ops.hpp"
#include "tsdapt/random.hpp"

namespace tsdapt {

using nlohmann::json;

namespace {

// Stream tags for make_stream.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kSourceStream = 2;
constexpr std::uint64_t kTargetStream = 3;
constexpr std::uint64_t kSplitStream = 4;
constexpr std::uint64_t kSampleStream = 5;

constexpr std::size_t kPredictBatch = 256;

std::string_view to_string(LambdaSchedule s) { return s == LambdaSchedule::ramp ? "ramp" : "constant"; }

LambdaSchedule parse_schedule(std::string_view name) {
  if (name == "ramp") return LambdaSchedule::ramp;
  if (name == "constant") return LambdaSchedule::constant;
  throw ConfigError("unknown lambda schedule '" + std::string(name) + "'");
}

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) j.at(key).get_to(out);
}

}  // namespace

// --- config ----------------------------------------------------------------

void ExperimentConfig::validate() const {
  weights.validate();
  if (target.empty()) throw ConfigError("config: target domain is required");
  if (method != Method::train_on_target) {
    if (sources.empty()) throw ConfigError("config: at least one source domain is required");
    if (std::find(sources.begin(), sources.end(), target) != sources.end()) {
      throw ConfigError("config: target '" + target + "' is also a source");
    }
    if (std::set<std::string>(sources.begin(), sources.end()).size() != sources.size()) {
      throw ConfigError("config: duplicate source domains");
    }
  }
  if (epochs == 0) throw ConfigError("config: epochs must be positive");
  if (batch_size == 0) throw ConfigError("config: batch size must be positive");
  if (label_proportions) LabelProportions check(*label_proportions);
  if (!(optimizer.learning_rate > 0.0) || !(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0) ||
      !(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0) || !(optimizer.epsilon > 0.0)) {
    throw ConfigError("config: invalid optimizer settings");
  }
}

void to_json(json& j, const ArchitectureConfig& a) {
  j = json{{"channels", a.channels},           {"num_classes", a.num_classes},
           {"num_sources", a.num_sources},     {"filters", a.filters},
           {"widths", a.widths},               {"domain_hidden", a.domain_hidden},
           {"contrastive_dim", a.contrastive_dim}};
}

void from_json(const json& j, ArchitectureConfig& a) {
  read_opt(j, "channels", a.channels);
  read_opt(j, "num_classes", a.num_classes);
  read_opt(j, "num_sources", a.num_sources);
  read_opt(j, "filters", a.filters);
  read_opt(j, "widths", a.widths);
  read_opt(j, "domain_hidden", a.domain_hidden);
  read_opt(j, "contrastive_dim", a.contrastive_dim);
}

void to_json(json& j, const ExperimentConfig& c) {
  j = json{{"method", to_string(c.method)},
           {"sources", c.sources},
           {"target", c.target},
           {"seed", c.seed},
           {"epochs", c.epochs},
           {"steps_per_epoch", c.steps_per_epoch},
           {"batch_size", c.batch_size},
           {"weights",
            {{"adversarial", c.weights.adversarial},
             {"contrastive", c.weights.contrastive},
             {"weak_supervision", c.weights.weak_supervision},
             {"temperature", c.weights.temperature}}},
           {"schedule", to_string(c.schedule)},
           {"label_proportions", c.label_proportions ? json(*c.label_proportions) : json(nullptr)},
           {"optimizer",
            {{"learning_rate", c.optimizer.learning_rate},
             {"beta1", c.optimizer.beta1},
             {"beta2", c.optimizer.beta2},
             {"epsilon", c.optimizer.epsilon}}},
           {"architecture", c.architecture},
           {"split", {{"train", c.split.train}, {"valid", c.split.valid}, {"test", c.split.test}}},
           {"split_seed", c.split_seed},
           {"by_week", c.by_week},
           {"include_context", c.include_context},
           {"select_on_validation", c.select_on_validation}};
}

void from_json(const json& j, ExperimentConfig& c) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  try {
    if (j.contains("method")) c.method = parse_method(j.at("method").get<std::string>());
    read_opt(j, "sources", c.sources);
    read_opt(j, "target", c.target);
    read_opt(j, "seed", c.seed);
    read_opt(j, "epochs", c.epochs);
    read_opt(j, "steps_per_epoch", c.steps_per_epoch);
    read_opt(j, "batch_size", c.batch_size);
    if (j.contains("weights")) {
      const auto& w = j.at("weights");
      read_opt(w, "adversarial", c.weights.adversarial);
      read_opt(w, "contrastive", c.weights.contrastive);
      read_opt(w, "weak_supervision", c.weights.weak_supervision);
      read_opt(w, "temperature", c.weights.temperature);
    }
    if (j.contains("schedule")) c.schedule = parse_schedule(j.at("schedule").get<std::string>());
    if (j.contains("label_proportions")) {
      const auto& p = j.at("label_proportions");
      c.label_proportions =
          p.is_null() ? std::nullopt : std::optional(p.get<std::vector<double>>());
    }
    if (j.contains("optimizer")) {
      const auto& o = j.at("optimizer");
      read_opt(o, "learning_rate", c.optimizer.learning_rate);
      read_opt(o, "beta1", c.optimizer.beta1);
      read_opt(o, "beta2", c.optimizer.beta2);
      read_opt(o, "epsilon", c.optimizer.epsilon);
    }
    read_opt(j, "architecture", c.architecture);
    if (j.contains("split")) {
      const auto& s = j.at("split");
      read_opt(s, "train", c.split.train);
      read_opt(s, "valid", c.split.valid);
      read_opt(s, "test", c.split.test);
    }
    read_opt(j, "split_seed", c.split_seed);
    read_opt(j, "by_week", c.by_week);
    read_opt(j, "include_context", c.include_context);
    read_opt(j, "select_on_validation", c.select_on_validation);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

// --- problem data ----------------------------------------------------------

std::size_t count_classes(const std::map<std::string, std::vector<Window>>& domains) {
  int top = -1;
  for (const auto& [id, windows] : domains) {
    for (const auto& w : windows) {
      if (w.label) top = std::max(top, *w.label);
    }
  }
  if (top < 0) throw DataError("no labeled windows");
  return static_cast<std::size_t>(top) + 1;
}

ProblemData prepare_problem(const ExperimentConfig& config,
                            const std::map<std::string, std::vector<Window>>& domains) {
  config.validate();
  auto find = [&](const std::string& id) -> const std::vector<Window>& {
    const auto it = domains.find(id);
    if (it == domains.end()) throw DataError("unknown domain '" + id + "'");
    if (it->second.empty()) throw DataError("domain '" + id + "' is empty");
    return it->second;
  };
  auto split = [&](const std::string& id) {
    return split_train_valid_test(id, find(id), config.split,
                                  make_stream(config.split_seed, kSplitStream, stable_hash(id))(),
                                  false);
  };

  ProblemData out;
  out.num_classes =
      config.architecture.num_classes ? config.architecture.num_classes : count_classes(domains);
  const bool on_target = config.method == Method::train_on_target;
  if (!on_target) {
    for (const auto& s : config.sources) out.sources.push_back(split(s));
  }
  out.target = split(config.target);
  if (uses_weak_supervision(config.method)) {
    out.proportions = config.label_proportions
                          ? LabelProportions(*config.label_proportions)
                          : measure_label_proportions(out.target.train, out.num_classes);
    if (out.proportions->size() != out.num_classes) {
      throw ConfigError("label proportions have " + std::to_string(out.proportions->size()) +
                        " classes, data has " + std::to_string(out.num_classes));
    }
  }
  if (!on_target) {
    strip_labels(out.target.train);
    out.target.train_labels_stripped = true;
  }
  const Window& first = out.target.train.front();
  out.channels = first.values.dim(0) + (config.include_context ? first.context.size() : 0);
  return out;
}

// --- training --------------------------------------------------------------

namespace {

/// Endless reshuffled pass over [0, size).
class BatchSampler {
 public:
  BatchSampler(std::size_t size, std::mt19937_64 rng) : order_(size), rng_(std::move(rng)) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::shuffle(order_.begin(), order_.end(), rng_);
  }

  void next(std::size_t count, std::vector<std::size_t>& out) {
    for (std::size_t i = 0; i < count; ++i) {
      if (pos_ == order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        pos_ = 0;
      }
      out.push_back(order_[pos_++]);
    }
  }

 private:
  std::vector<std::size_t> order_;
  std::mt19937_64 rng_;
  std::size_t pos_ = 0;
};

void push(LossTrace& t, double total, double task, double domain, double contrastive, double weak) {
  t.total.push_back(total);
  t.task.push_back(task);
  t.domain.push_back(domain);
  t.contrastive.push_back(contrastive);
  t.weak_supervision.push_back(weak);
}

double mean_of(const std::vector<double>& v, std::size_t begin, std::size_t end) {
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) s += v[i];
  return s / static_cast<double>(end - begin);
}

double value_of(const std::optional<Var>& v) { return v ? v->value().item() : 0.0; }

double mean_cross_entropy(const ModelParameters& model, const std::vector<Window>& windows,
                          bool include_context) {
  const Array probs = predict(model, windows, include_context);
  double s = 0.0;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const int y = *windows[i].label;
    s -= std::log(std::max(probs.at(i, static_cast<std::size_t>(y)), kProbabilityFloor));
  }
  return s / static_cast<double>(windows.size());
}

void require_labeled(const DomainDataset& d, const char* role) {
  if (d.train.empty()) throw DataError(std::string(role) + " domain '" + d.id + "' has no training windows");
  if (d.train_labels_stripped) {
    throw DataError(std::string(role) + " domain '" + d.id + "' training split is unlabeled");
  }
}

}  // namespace

TrainedModel train(const ExperimentConfig& config, const ProblemData& data) {
  config.validate();
  const Method method = config.method;
  const bool on_target = method == Method::train_on_target;
  const bool adversarial = uses_adversary(method);
  const bool contrastive = uses_contrastive(method);
  const bool weak = uses_weak_supervision(method);
  const bool needs_target = adversarial || weak;

  if (on_target) {
    require_labeled(data.target, "target");
  } else {
    if (data.sources.empty()) throw DataError("no source domains");
    for (const auto& s : data.sources) require_labeled(s, "source");
    if (needs_target && data.target.train.empty()) throw DataError("target has no training windows");
  }
  if (weak && !data.proportions) throw ConfigError(std::string(to_string(method)) + " requires label proportions");

  ArchitectureConfig arch = config.architecture;
  arch.channels = data.channels;
  arch.num_classes = data.num_classes;
  arch.num_sources = std::max<std::size_t>(1, data.sources.size());
  arch.validate();

  TrainedModel out;
  out.model = init_parameters(arch, make_stream(config.seed, kInitStream)());
  out.optimizer.config = config.optimizer;
  RunResult& result = out.result;
  result.config = config;

  // Labeled training streams: the sources, or the target itself.
  std::vector<const DomainDataset*> labeled;
  if (on_target) {
    labeled.push_back(&data.target);
  } else {
    for (const auto& s : data.sources) labeled.push_back(&s);
  }
  std::vector<BatchSampler> samplers;
  for (std::size_t i = 0; i < labeled.size(); ++i) {
    samplers.emplace_back(labeled[i]->train.size(), make_stream(config.seed, kSourceStream, i));
  }
  std::optional<BatchSampler> target_sampler;
  if (needs_target) {
    target_sampler.emplace(data.target.train.size(), make_stream(config.seed, kTargetStream));
  }

  std::size_t largest = 0;
  for (const auto* d : labeled) largest = std::max(largest, d->train.size());
  const std::size_t steps_per_epoch =
      config.steps_per_epoch ? config.steps_per_epoch
                             : std::max<std::size_t>(1, (largest + config.batch_size - 1) / config.batch_size);
  const std::size_t total_steps = config.epochs * steps_per_epoch;

  // Labels from target training windows are counted so tests can assert that
  // adaptation methods never consult them.
  auto label_of = [&](const Window& w, bool from_target) {
    if (from_target) ++result.target_label_reads;
    if (!w.label) throw DataError("unlabeled window in a labeled split");
    return *w.label;
  };

  std::vector<Array*> params = parameter_list(out.model.values);
  std::optional<Parameters<Array>> best;
  double best_loss = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> picks;
  std::vector<const Window*> batch;
  std::vector<int> labels;
  std::vector<int> domains;
  const auto start = std::chrono::steady_clock::now();

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      const std::size_t step = epoch * steps_per_epoch + s;
      const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
      const double lambda =
          config.weights.adversarial *
          (config.schedule == LambdaSchedule::ramp ? reversal_schedule(progress) : 1.0);

      batch.clear();
      labels.clear();
      domains.clear();
      for (std::size_t i = 0; i < labeled.size(); ++i) {
        picks.clear();
        samplers[i].next(config.batch_size, picks);
        for (std::size_t k : picks) {
          const Window& w = labeled[i]->train[k];
          batch.push_back(&w);
          labels.push_back(label_of(w, on_target));
          domains.push_back(static_cast<int>(i));
        }
      }
      const std::size_t labeled_rows = batch.size();
      if (needs_target) {
        picks.clear();
        target_sampler->next(config.batch_size, picks);
        for (std::size_t k : picks) {
          batch.push_back(&data.target.train[k]);
          domains.push_back(static_cast<int>(arch.target_domain()));
        }
      }

      const BoundParameters bound = bind(out.model.values, true);
      const Var x = constant(stack_values(batch, config.include_context));
      const Var features = feature_extractor_forward(bound.feature, x);
      const Var labeled_features =
          needs_target ? rows(features, 0, labeled_rows) : features;

      LossComponents parts;
      parts.task = task_loss(task_classifier_forward(bound.task, labeled_features), labels);
      if (adversarial) {
        parts.domain = domain_adversarial_loss(
            domain_classifier_forward(bound.domain, features, lambda), domains);
      }
      if (contrastive) {
        const std::vector<int> source_domains(domains.begin(), domains.begin() + static_cast<std::ptrdiff_t>(labeled_rows));
        parts.contrastive =
            contrastive_loss(contrastive_head_forward(bound.contrastive, labeled_features),
                             build_contrastive_sets(labels, source_domains),
                             config.weights.temperature);
      }
      if (weak) {
        const Var target_probs =
            task_classifier_forward(bound.task, rows(features, labeled_rows, batch.size()));
        parts.weak_supervision = weak_supervision_loss(target_probs, *data.proportions);
      }
      const Var total = total_loss(parts, config.weights, method);

      const Gradients grads = backward(total);
      std::vector<Array> g;
      g.reserve(params.size());
      bound.for_each([&](const std::string&, const Var& v) { g.push_back(grads.at(v)); });
      adam_step(params, g, out.optimizer);

      push(result.steps, total.value().item(), value_of(parts.task), value_of(parts.domain),
           value_of(parts.contrastive), value_of(parts.weak_supervision));
    }

    const std::size_t b = epoch * steps_per_epoch;
    const std::size_t e = b + steps_per_epoch;
    push(result.epochs, mean_of(result.steps.total, b, e), mean_of(result.steps.task, b, e),
         mean_of(result.steps.domain, b, e), mean_of(result.steps.contrastive, b, e),
         mean_of(result.steps.weak_supervision, b, e));

    if (config.select_on_validation) {
      double loss = 0.0;
      std::size_t counted = 0;
      for (const auto* d : labeled) {
        if (d->valid.empty()) continue;
        loss += mean_cross_entropy(out.model, d->valid, config.include_context);
        ++counted;
      }
      if (counted > 0) {
        loss /= static_cast<double>(counted);
        result.source_valid_loss.push_back(loss);
        if (loss < best_loss) {
          best_loss = loss;
          best = out.model.values;
          result.selected_epoch = epoch;
        }
      }
    }
  }
  if (best) {
    out.model.values = std::move(*best);
  } else {
    result.selected_epoch = config.epochs - 1;
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

Array predict(const ModelParameters& model, const std::vector<const Window*>& windows,
              bool include_context) {
  if (windows.empty()) throw DataError("predict: no windows");
  const BoundParameters bound = bind(model.values, false);
  const std::size_t L = model.arch.num_classes;
  Array out(Shape{windows.size(), L});
  for (std::size_t begin = 0; begin < windows.size(); begin += kPredictBatch) {
    const std::size_t end = std::min(windows.size(), begin + kPredictBatch);
    const std::vector<const Window*> part(windows.begin() + static_cast<std::ptrdiff_t>(begin),
                                          windows.begin() + static_cast<std::ptrdiff_t>(end));
    const Var x = constant(stack_values(part, include_context));
    const Var probs =
        task_classifier_forward(bound.task, feature_extractor_forward(bound.feature, x));
    std::copy(probs.value().data().begin(), probs.value().data().end(),
              out.data().begin() + static_cast<std::ptrdiff_t>(begin * L));
  }
  return out;
}

Array predict(const ModelParameters& model, const std::vector<Window>& windows,
              bool include_context) {
  std::vector<const Window*> ptrs;
  ptrs.reserve(windows.size());
  for (const auto& w : windows) ptrs.push_back(&w);
  return predict(model, ptrs, include_context);
}

void evaluate(const ModelParameters& model, const ProblemData& data, RunResult& result) {
  const auto& test = data.target.test;
  std::vector<int> labels;
  for (const auto& w : test) {
    if (!w.label) throw DataError("target test window without a label");
    labels.push_back(*w.label);
  }
  const Array probs = predict(model, test, result.config.include_context);
  result.target_auc = auc_macro(probs, labels);
  result.target_accuracy = accuracy(probs, labels);
}

// --- run results -----------------------------------------------------------

namespace {

json trace_json(const LossTrace& t) {
  return json{{"total", t.total},
              {"task", t.task},
              {"domain", t.domain},
              {"contrastive", t.contrastive},
              {"weak_supervision", t.weak_supervision}};
}

LossTrace trace_from_json(const json& j) {
  LossTrace t;
  read_opt(j, "total", t.total);
  read_opt(j, "task", t.task);
  read_opt(j, "domain", t.domain);
  read_opt(j, "contrastive", t.contrastive);
  read_opt(j, "weak_supervision", t.weak_supervision);
  return t;
}

}  // namespace

json run_result_json(const RunResult& r, bool include_traces, bool include_wall_time) {
  json j{{"config", r.config},
         {"tag",
          {{"mode", r.tag.mode},
           {"n", r.tag.n},
           {"source_set", r.tag.source_set},
           {"person", r.tag.person},
           {"gap", r.tag.gap},
           {"direction", r.tag.direction}}},
         {"target_auc", r.target_auc},
         {"target_accuracy", r.target_accuracy},
         {"epochs", trace_json(r.epochs)},
         {"source_valid_loss", r.source_valid_loss},
         {"selected_epoch", r.selected_epoch},
         {"target_label_reads", r.target_label_reads}};
  if (include_traces) j["steps"] = trace_json(r.steps);
  if (include_wall_time) j["wall_seconds"] = r.wall_seconds;
  return j;
}

RunResult run_result_from_json(const json& j) {
  RunResult r;
  try {
    j.at("config").get_to(r.config);
    if (j.contains("tag")) {
      const auto& t = j.at("tag");
      read_opt(t, "mode", r.tag.mode);
      read_opt(t, "n", r.tag.n);
      read_opt(t, "source_set", r.tag.source_set);
      read_opt(t, "person", r.tag.person);
      read_opt(t, "gap", r.tag.gap);
      read_opt(t, "direction", r.tag.direction);
    }
    j.at("target_auc").get_to(r.target_auc);
    j.at("target_accuracy").get_to(r.target_accuracy);
    if (j.contains("epochs")) r.epochs = trace_from_json(j.at("epochs"));
    if (j.contains("steps")) r.steps = trace_from_json(j.at("steps"));
    read_opt(j, "source_valid_loss", r.source_valid_loss);
    read_opt(j, "selected_epoch", r.selected_epoch);
    read_opt(j, "target_label_reads", r.target_label_reads);
    read_opt(j, "wall_seconds", r.wall_seconds);
  } catch (const json::exception& e) {
    throw DataError(std::string("run result: ") + e.what());
  }
  return r;
}

// --- protocol --------------------------------------------------------------

std::vector<ExperimentConfig> sample_experiment_configs(const std::vector<std::string>& domains,
                                                        std::size_t n, std::size_t targets_count,
                                                        std::size_t sets_per_target,
                                                        std::uint64_t seed,
                                                        const ExperimentConfig& base) {
  std::vector<std::string> pool = domains;
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
  if (n == 0) throw ConfigError("need at least one source domain");
  if (n >= pool.size()) {
    throw ConfigError("n = " + std::to_string(n) + " sources needs more than " +
                      std::to_string(pool.size()) + " domains");
  }
  auto rng = make_stream(seed, kSampleStream, n);

  std::vector<std::string> targets = pool;
  std::shuffle(targets.begin(), targets.end(), rng);
  if (targets_count > targets.size()) {
    warn("only " + std::to_string(targets.size()) + " target domains available (requested " +
         std::to_string(targets_count) + ")");
    targets_count = targets.size();
  }
  targets.resize(targets_count);

  // Binomial coefficient, saturating.
  auto choose = [](std::size_t m, std::size_t k) {
    double c = 1.0;
    for (std::size_t i = 0; i < k; ++i) c = c * static_cast<double>(m - i) / static_cast<double>(i + 1);
    return c;
  };

  std::vector<ExperimentConfig> out;
  for (const auto& target : targets) {
    std::vector<std::string> others;
    for (const auto& d : pool) {
      if (d != target) others.push_back(d);
    }
    std::size_t sets = sets_per_target;
    if (choose(others.size(), n) < static_cast<double>(sets)) {
      sets = static_cast<std::size_t>(std::llround(choose(others.size(), n)));
      warn("target '" + target + "': only " + std::to_string(sets) + " distinct source sets");
    }
    std::set<std::vector<std::string>> seen;
    while (seen.size() < sets) {
      std::vector<std::string> pick;
      std::sample(others.begin(), others.end(), std::back_inserter(pick),
                  static_cast<std::ptrdiff_t>(n), rng);
      if (!seen.insert(pick).second) continue;
      ExperimentConfig c = base;
      c.target = target;
      c.sources = pick;
      out.push_back(std::move(c));
    }
  }
  return out;
}

std::string_view to_string(Direction d) { return d == Direction::forward ? "forward" : "backward"; }

Direction parse_direction(std::string_view name) {
  if (name == "forward") return Direction::forward;
  if (name == "backward") return Direction::backward;
  throw ConfigError("unknown direction '" + std::string(name) + "'");
}

std::vector<CrossTimeProblem> enumerate_cross_time_problems(std::vector<int> weeks,
                                                            Direction direction) {
  std::sort(weeks.begin(), weeks.end());
  weeks.erase(std::unique(weeks.begin(), weeks.end()), weeks.end());
  if (weeks.size() < 2) throw ConfigError("cross-time adaptation needs at least 2 weeks");
  std::vector<CrossTimeProblem> out;
  for (int a : weeks) {
    for (int b : weeks) {
      if (a >= b) continue;
      if (direction == Direction::forward) {
        out.push_back({a, b, b - a});
      } else {
        out.push_back({b, a, b - a});
      }
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    return std::tie(x.gap, x.source_week) < std::tie(y.gap, y.source_week);
  });
  return out;
}

std::vector<RunResult> run_all(const std::vector<Job>& jobs,
                               const std::map<std::string, std::vector<Window>>& domains,
                               std::size_t threads, bool verbose) {
  std::vector<RunResult> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex log_mutex;

  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        const auto start = std::chrono::steady_clock::now();
        const ProblemData data = prepare_problem(jobs[i].config, domains);
        TrainedModel trained = train(jobs[i].config, data);
        evaluate(trained.model, data, trained.result);
        trained.result.tag = jobs[i].tag;
        trained.result.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        results[i] = std::move(trained.result);
        if (verbose) {
          const std::lock_guard lock(log_mutex);
          std::clog << "[" << ++done << "/" << jobs.size() << "] "
                    << to_string(jobs[i].config.method) << " -> " << jobs[i].config.target
                    << " auc=" << results[i].target_auc << "\n";
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, jobs.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

std::vector<RunResult> run_cross_person(const std::vector<Window>& windows,
                                        const ProtocolOptions& options) {
  const auto domains = group_by_domain(windows, false);
  std::vector<std::string> ids;
  for (const auto& [id, _] : domains) ids.push_back(id);

  std::vector<Job> jobs;
  for (std::size_t n : options.source_counts) {
    const auto configs = sample_experiment_configs(ids, n, options.targets_count,
                                                   options.sets_per_target, options.base.seed,
                                                   options.base);
    std::map<std::string, std::size_t> set_index;
    for (const auto& c : configs) {
      const std::size_t set = set_index[c.target]++;
      for (Method m : options.methods) {
        if (m == Method::train_on_target && set != 0) continue;
        for (std::size_t k = 0; k < options.seeds; ++k) {
          Job job{c, RunTag{"cross_person", n, set, "", 0, ""}};
          job.config.method = m;
          job.config.seed = options.base.seed + k;
          if (m == Method::train_on_target) job.config.sources.clear();
          jobs.push_back(std::move(job));
        }
      }
    }
  }
  return run_all(jobs, domains, options.threads, options.verbose);
}

std::vector<RunResult> run_cross_time(const std::vector<Window>& windows,
                                      const ProtocolOptions& options) {
  const auto domains = group_by_domain(windows, true);
  std::map<std::string, std::vector<int>> weeks;
  for (const auto& w : windows) weeks[w.person].push_back(w.week);

  std::vector<Job> jobs;
  for (auto& [person, list] : weeks) {
    for (Direction dir : options.directions) {
      for (const auto& p : enumerate_cross_time_problems(list, dir)) {
        for (Method m : options.methods) {
          for (std::size_t k = 0; k < options.seeds; ++k) {
            Job job{options.base,
                    RunTag{"cross_time", 1, 0, person, p.gap, std::string(to_string(dir))}};
            job.config.method = m;
            job.config.seed = options.base.seed + k;
            job.config.by_week = true;
            job.config.target = person + "/w" + std::to_string(p.target_week);
            if (m != Method::train_on_target) {
              job.config.sources = {person + "/w" + std::to_string(p.source_week)};
            } else {
              job.config.sources.clear();
            }
            jobs.push_back(std::move(job));
          }
        }
      }
    }
  }
  return run_all(jobs, domains, options.threads, options.verbose);
}

}  // namespace tsdapt
