#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tsdapt/data.hpp"
#include "tsdapt/losses.hpp"
#include "tsdapt/models.hpp"
#include "tsdapt/optimizer.hpp"

namespace tsdapt {

enum class LambdaSchedule { ramp, constant };

/// One adaptation problem plus everything needed to train it reproducibly.
struct ExperimentConfig {
  Method method = Method::codats;
  std::vector<std::string> sources;
  std::string target;
  std::uint64_t seed = 0;
  std::size_t epochs = 30;
  std::size_t steps_per_epoch = 0;  // 0: one pass over the largest training split
  std::size_t batch_size = 64;      // per domain
  LossWeights weights;
  LambdaSchedule schedule = LambdaSchedule::ramp;
  std::optional<std::vector<double>> label_proportions;  // measured when absent
  AdamConfig optimizer;
  ArchitectureConfig architecture;  // channels, classes and sources are filled from the data
  SplitFractions split;
  std::uint64_t split_seed = 0;
  bool by_week = false;
  bool include_context = false;
  bool select_on_validation = true;  // keep the epoch with the lowest validation loss

  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);
void to_json(nlohmann::json& j, const ArchitectureConfig& a);
void from_json(const nlohmann::json& j, ArchitectureConfig& a);

/// Datasets for one problem. Target training windows are label-stripped unless
/// the method is train_on_target.
struct ProblemData {
  std::vector<DomainDataset> sources;
  DomainDataset target;
  std::size_t num_classes = 0;
  std::size_t channels = 0;
  std::optional<LabelProportions> proportions;
};

/// Splits the configured domains (seeded per domain id) and, for -WS methods
/// without configured proportions, measures them on the target training split
/// before its labels are discarded.
ProblemData prepare_problem(const ExperimentConfig& config,
                            const std::map<std::string, std::vector<Window>>& domains);

/// Number of classes implied by the labels present in `domains`.
std::size_t count_classes(const std::map<std::string, std::vector<Window>>& domains);

struct LossTrace {
  std::vector<double> total;
  std::vector<double> task;
  std::vector<double> domain;
  std::vector<double> contrastive;
  std::vector<double> weak_supervision;

  std::size_t size() const { return total.size(); }
};

/// Where a run sits in a protocol sweep.
struct RunTag {
  std::string mode;  // "cross_person", "cross_time" or empty for a single run
  std::size_t n = 0;
  std::size_t source_set = 0;
  std::string person;
  int gap = 0;
  std::string direction;
};

struct RunResult {
  ExperimentConfig config;
  RunTag tag;
  double target_auc = 0.0;
  double target_accuracy = 0.0;
  LossTrace steps;
  LossTrace epochs;  // per-epoch means of `steps`
  std::vector<double> source_valid_loss;
  std::size_t selected_epoch = 0;
  std::size_t target_label_reads = 0;  // labels read from target training windows
  double wall_seconds = 0.0;
};

nlohmann::json run_result_json(const RunResult& r, bool include_traces, bool include_wall_time);
RunResult run_result_from_json(const nlohmann::json& j);

struct TrainedModel {
  ModelParameters model;
  OptimizerState optimizer;
  RunResult result;
};

/// Trains per the configured method: each step draws one batch per source
/// domain and, when the method needs it, one target batch, then takes one Adam
/// step on the method's total loss. Keeps the parameters with the lowest
/// source validation loss (target validation for train_on_target).
TrainedModel train(const ExperimentConfig& config, const ProblemData& data);

/// Softmax class probabilities, [count x L].
Array predict(const ModelParameters& model, const std::vector<const Window*>& windows,
              bool include_context);
Array predict(const ModelParameters& model, const std::vector<Window>& windows,
              bool include_context);

/// Fills AUC and accuracy from the target test split.
void evaluate(const ModelParameters& model, const ProblemData& data, RunResult& result);

// --- checkpoints -----------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParameters model;
  OptimizerState optimizer;
  nlohmann::json metadata;  // free-form, e.g. the experiment config
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
/// Throws FormatError on bad magic, checksum mismatch, truncation or an
/// unsupported version.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// --- protocol --------------------------------------------------------------

/// Random (target, source set) problems. Targets are distinct; each target gets
/// up to `sets_per_target` distinct source sets of size n drawn from the other
/// domains.
std::vector<ExperimentConfig> sample_experiment_configs(const std::vector<std::string>& domains,
                                                        std::size_t n, std::size_t targets_count,
                                                        std::size_t sets_per_target,
                                                        std::uint64_t seed,
                                                        const ExperimentConfig& base = {});

enum class Direction { forward, backward };

std::string_view to_string(Direction d);
Direction parse_direction(std::string_view name);

struct CrossTimeProblem {
  int source_week = 0;
  int target_week = 0;
  int gap = 0;

  friend bool operator==(const CrossTimeProblem&, const CrossTimeProblem&) = default;
};

/// Every ordered week pair in the given direction, sorted by gap then source.
std::vector<CrossTimeProblem> enumerate_cross_time_problems(std::vector<int> weeks,
                                                            Direction direction);

struct ProtocolOptions {
  ExperimentConfig base;
  std::vector<Method> methods{Method::no_adaptation, Method::codats,  Method::codats_ws,
                              Method::calda,         Method::calda_ws, Method::train_on_target};
  std::vector<std::size_t> source_counts{2};  // n values (cross-person)
  std::size_t targets_count = 10;
  std::size_t sets_per_target = 3;
  std::size_t seeds = 1;  // repeats per problem, seeds base.seed + k
  std::vector<Direction> directions{Direction::forward};  // cross-time
  std::size_t threads = 1;
  bool verbose = false;
};

/// Cross-person sweep. Train on Target runs once per (target, seed) since it
/// ignores sources.
std::vector<RunResult> run_cross_person(const std::vector<Window>& windows,
                                        const ProtocolOptions& options);

/// Cross-time sweep: per person, single-source adaptation between weeks.
std::vector<RunResult> run_cross_time(const std::vector<Window>& windows,
                                      const ProtocolOptions& options);

struct Job {
  ExperimentConfig config;
  RunTag tag;
};

/// Runs independent jobs on up to `threads` workers; results keep input order.
std::vector<RunResult> run_all(const std::vector<Job>& jobs,
                               const std::map<std::string, std::vector<Window>>& domains,
                               std::size_t threads, bool verbose);

}  // namespace tsdapt
