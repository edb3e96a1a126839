#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "tsdapt/errors.hpp"
#include "tsdapt/experiment.hpp"
#include "tsdapt/synthetic.hpp"

namespace tsdapt {
namespace {

namespace fs = std::filesystem;

std::map<std::string, std::vector<Window>> small_domains(double shift = 0.5, std::size_t per_domain = 60) {
  SyntheticSpec s;
  s.num_domains = 3;
  s.length = 32;
  s.windows_per_week = per_domain;
  s.shift_magnitude = shift;
  s.noise = 0.2;
  s.seed = 5;
  std::map<std::string, std::vector<Window>> out;
  for (auto& d : generate_synthetic(s)) out[d.id] = std::move(d.windows);
  return out;
}

ExperimentConfig small_config(Method method) {
  ExperimentConfig c;
  c.method = method;
  c.sources = {"p00", "p01"};
  c.target = "p02";
  c.seed = 3;
  c.epochs = 4;
  c.steps_per_epoch = 5;
  c.batch_size = 8;
  c.architecture.filters = {4, 6, 4};
  c.architecture.widths = {5, 3, 3};
  c.architecture.domain_hidden = 6;
  c.architecture.contrastive_dim = 5;
  c.optimizer.learning_rate = 3e-3;
  return c;
}

TrainedModel run(const ExperimentConfig& c, const std::map<std::string, std::vector<Window>>& domains) {
  return train(c, prepare_problem(c, domains));
}

TEST(ExperimentConfig, JsonRoundTrip) {
  ExperimentConfig c = small_config(Method::calda_ws);
  c.label_proportions = std::vector<double>{0.25, 0.25, 0.25, 0.25};
  c.schedule = LambdaSchedule::constant;
  c.weights.temperature = 0.2;
  c.include_context = true;
  nlohmann::json j = c;
  const auto back = j.get<ExperimentConfig>();
  EXPECT_EQ(nlohmann::json(back), j);
}

TEST(ExperimentConfig, PartialJsonUsesDefaults) {
  const auto c = nlohmann::json::parse(R"({"method": "codats", "target": "x", "sources": ["a"]})")
                     .get<ExperimentConfig>();
  EXPECT_EQ(c.epochs, 30u);
  EXPECT_EQ(c.batch_size, 64u);
  EXPECT_EQ(c.weights.contrastive, 0.1);
  EXPECT_THROW(nlohmann::json::parse(R"({"method": "bogus"})").get<ExperimentConfig>(), ConfigError);
}

TEST(ExperimentConfig, Validation) {
  auto c = small_config(Method::codats);
  c.sources.push_back("p02");
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config(Method::codats);
  c.sources.clear();
  EXPECT_THROW(c.validate(), ConfigError);
  c.method = Method::train_on_target;
  EXPECT_NO_THROW(c.validate());
  c = small_config(Method::codats_ws);
  c.label_proportions = std::vector<double>{0.7, 0.7};
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(SampleConfigs, CountsAndDisjointness) {
  std::vector<std::string> ids;
  for (int i = 0; i < 12; ++i) ids.push_back("d" + std::to_string(i));
  const auto configs = sample_experiment_configs(ids, 3, 10, 3, 42);
  ASSERT_EQ(configs.size(), 30u);
  std::set<std::string> targets;
  for (const auto& c : configs) {
    targets.insert(c.target);
    EXPECT_EQ(c.sources.size(), 3u);
    EXPECT_EQ(std::count(c.sources.begin(), c.sources.end(), c.target), 0);
  }
  EXPECT_EQ(targets.size(), 10u);
  const auto again = sample_experiment_configs(ids, 3, 10, 3, 42);
  for (std::size_t i = 0; i < configs.size(); ++i) {
    EXPECT_EQ(configs[i].target, again[i].target);
    EXPECT_EQ(configs[i].sources, again[i].sources);
  }
}

TEST(SampleConfigs, SmallPoolAndErrors) {
  const std::vector<std::string> ids{"a", "b", "c"};
  // Each target has only C(2,2) = 1 source set of size 2.
  EXPECT_EQ(sample_experiment_configs(ids, 2, 10, 3, 0).size(), 3u);
  EXPECT_THROW(sample_experiment_configs(ids, 3, 1, 1, 0), ConfigError);
}

TEST(CrossTime, EnumeratesPairsByGap) {
  const auto fwd = enumerate_cross_time_problems({0, 1, 2, 3}, Direction::forward);
  ASSERT_EQ(fwd.size(), 6u);
  std::map<int, int> by_gap;
  for (const auto& p : fwd) {
    ++by_gap[p.gap];
    EXPECT_LT(p.source_week, p.target_week);
    EXPECT_EQ(p.gap, p.target_week - p.source_week);
  }
  EXPECT_EQ(by_gap, (std::map<int, int>{{1, 3}, {2, 2}, {3, 1}}));
  EXPECT_EQ(fwd.back(), (CrossTimeProblem{0, 3, 3}));

  const auto back = enumerate_cross_time_problems({5, 4}, Direction::backward);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0], (CrossTimeProblem{5, 4, 1}));
  EXPECT_EQ(enumerate_cross_time_problems({1, 2}, Direction::forward).size(), 1u);
  EXPECT_THROW(enumerate_cross_time_problems({1}, Direction::forward), ConfigError);
}

TEST(PrepareProblem, TargetTrainStrippedAndProportionsMeasured) {
  const auto domains = small_domains();
  auto c = small_config(Method::codats_ws);
  const auto data = prepare_problem(c, domains);
  EXPECT_EQ(data.num_classes, 4u);
  EXPECT_EQ(data.channels, 3u);
  ASSERT_TRUE(data.proportions);
  for (const auto& w : data.target.train) EXPECT_FALSE(w.label);
  for (const auto& s : data.sources) EXPECT_FALSE(s.train_labels_stripped);

  c.method = Method::train_on_target;
  const auto tot = prepare_problem(c, domains);
  EXPECT_TRUE(tot.sources.empty());
  EXPECT_FALSE(tot.target.train_labels_stripped);

  c = small_config(Method::codats);
  c.target = "missing";
  EXPECT_THROW(prepare_problem(c, domains), DataError);
}

TEST(Train, DeterministicTraces) {
  const auto domains = small_domains();
  for (Method m : {Method::codats, Method::calda_ws}) {
    const auto a = run(small_config(m), domains);
    const auto b = run(small_config(m), domains);
    EXPECT_EQ(a.result.steps.total, b.result.steps.total);
    EXPECT_EQ(a.model, b.model);
  }
}

TEST(Train, AdaptationNeverReadsTargetLabels) {
  const auto domains = small_domains();
  for (Method m : {Method::no_adaptation, Method::codats, Method::codats_ws, Method::calda,
                   Method::calda_ws}) {
    EXPECT_EQ(run(small_config(m), domains).result.target_label_reads, 0u) << to_string(m);
  }
  EXPECT_GT(run(small_config(Method::train_on_target), domains).result.target_label_reads, 0u);
}

TEST(Train, ZeroLambdaCodatsMatchesNoAdaptation) {
  const auto domains = small_domains();
  auto codats = small_config(Method::codats);
  codats.weights.adversarial = 0.0;
  const auto a = run(codats, domains);
  const auto b = run(small_config(Method::no_adaptation), domains);
  ASSERT_EQ(a.result.steps.task.size(), 20u);
  EXPECT_EQ(a.result.steps.task, b.result.steps.task);
  EXPECT_EQ(a.model.values.feature, b.model.values.feature);
  EXPECT_EQ(a.model.values.task, b.model.values.task);
}

TEST(Train, ZeroGammaCaldaMatchesCodats) {
  const auto domains = small_domains();
  auto calda = small_config(Method::calda);
  calda.weights.contrastive = 0.0;
  const auto a = run(calda, domains);
  const auto b = run(small_config(Method::codats), domains);
  EXPECT_EQ(a.result.steps.total, b.result.steps.total);
  EXPECT_EQ(a.result.steps.task, b.result.steps.task);
  EXPECT_EQ(a.result.steps.domain, b.result.steps.domain);
}

TEST(Train, WeakSupervisionRequiresProportions) {
  const auto domains = small_domains();
  const auto c = small_config(Method::codats_ws);
  auto data = prepare_problem(c, domains);
  data.proportions.reset();
  EXPECT_THROW(train(c, data), ConfigError);
}

TEST(Train, EmptyDatasetsRejected) {
  const auto domains = small_domains();
  const auto c = small_config(Method::codats);
  auto data = prepare_problem(c, domains);
  data.sources[0].train.clear();
  EXPECT_THROW(train(c, data), DataError);
}

TEST(Train, NoAdaptationLossDecreasesOverEarlyEpochs) {
  const auto domains = small_domains(0.0, 120);
  auto c = small_config(Method::no_adaptation);
  c.epochs = 5;
  c.steps_per_epoch = 20;
  const auto r = run(c, domains).result;
  ASSERT_EQ(r.epochs.total.size(), 5u);
  for (std::size_t e = 1; e < 5; ++e) EXPECT_LT(r.epochs.total[e], r.epochs.total[e - 1]) << e;
}

TEST(Predict, RowsSumToOneAndRepeatable) {
  const auto domains = small_domains();
  const auto c = small_config(Method::no_adaptation);
  const auto data = prepare_problem(c, domains);
  const auto trained = train(c, data);
  const Array p = predict(trained.model, data.target.test, false);
  EXPECT_EQ(p.shape(), (Shape{data.target.test.size(), 4}));
  for (std::size_t i = 0; i < p.dim(0); ++i) {
    double total = 0.0;
    for (double v : p.row(i)) total += v;
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
  EXPECT_EQ(predict(trained.model, data.target.test, false), p);

  std::vector<Window> wrong{data.target.test[0]};
  wrong[0].values = Array(Shape{2, 32});
  EXPECT_THROW(predict(trained.model, wrong, false), ShapeError);
}

TEST(Predict, TrainOnTargetSeparatesCleanData) {
  const auto domains = small_domains(0.0, 200);
  auto c = small_config(Method::train_on_target);
  c.epochs = 10;
  c.steps_per_epoch = 20;
  c.batch_size = 16;
  c.optimizer.learning_rate = 1e-2;
  const auto data = prepare_problem(c, domains);
  auto trained = train(c, data);
  evaluate(trained.model, data, trained.result);
  EXPECT_GT(trained.result.target_accuracy, 0.95);
  EXPECT_GT(trained.result.target_auc, 0.95);
}

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("tsdapt_ckpt_" + std::to_string(std::random_device{}()));
    fs::create_directories(dir_);
    domains_ = small_domains();
    config_ = small_config(Method::calda);
    data_ = prepare_problem(config_, domains_);
    trained_ = train(config_, data_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path save() {
    const fs::path p = dir_ / "model.ckpt";
    save_checkpoint(p, {trained_.model, trained_.optimizer, nlohmann::json(config_)});
    return p;
  }

  fs::path dir_;
  std::map<std::string, std::vector<Window>> domains_;
  ExperimentConfig config_;
  ProblemData data_;
  TrainedModel trained_;
};

TEST_F(CheckpointTest, RoundTripIsBitExact) {
  const auto loaded = load_checkpoint(save());
  EXPECT_EQ(loaded.model, trained_.model);
  EXPECT_EQ(loaded.optimizer.step, trained_.optimizer.step);
  EXPECT_EQ(loaded.optimizer.first_moment, trained_.optimizer.first_moment);
  EXPECT_EQ(loaded.optimizer.second_moment, trained_.optimizer.second_moment);
  EXPECT_EQ(loaded.metadata.get<ExperimentConfig>().target, "p02");
  EXPECT_EQ(predict(loaded.model, data_.target.test, false), predict(trained_.model, data_.target.test, false));
}

TEST_F(CheckpointTest, TruncatedFileFailsChecksum) {
  const auto p = save();
  fs::resize_file(p, fs::file_size(p) - 9);
  try {
    load_checkpoint(p);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos) << e.what();
  }
}

TEST_F(CheckpointTest, FlippedByteFailsChecksum) {
  const auto p = save();
  std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
  f.seekp(200);
  f.put('\x7f');
  f.close();
  EXPECT_THROW(load_checkpoint(p), FormatError);
}

TEST_F(CheckpointTest, WrongMagicIsFormatError) {
  const auto p = save();
  std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
  f.write("NOTCKPT!", 8);
  f.close();
  try {
    load_checkpoint(p);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("magic"), std::string::npos) << e.what();
  }
}

TEST_F(CheckpointTest, VersionMismatchRejected) {
  // Rewrite the version field and recompute nothing: checksum fails first, so
  // patch both the version and the trailing CRC.
  const auto p = save();
  std::ifstream in(p, std::ios::binary);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  buf[8] = 2;
  buf.resize(buf.size() - 4);
  // CRC-32 (IEEE) computed independently of zlib.
  std::uint32_t crc = 0xffffffffu;
  for (unsigned char byte : buf) {
    crc ^= byte;
    for (int k = 0; k < 8; ++k) crc = (crc >> 1) ^ (0xedb88320u & (0u - (crc & 1u)));
  }
  crc ^= 0xffffffffu;
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>(crc >> (8 * i)));
  std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  try {
    load_checkpoint(p);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos) << e.what();
  }
}

TEST(RunResult, JsonRoundTrip) {
  RunResult r;
  r.config = small_config(Method::codats);
  r.tag = {"cross_person", 2, 1, "", 0, ""};
  r.target_auc = 0.8125;
  r.target_accuracy = 0.5;
  r.epochs.total = {1.0, 0.5};
  r.epochs.task = {0.9, 0.4};
  r.epochs.domain = {0.1, 0.1};
  r.epochs.contrastive = {0, 0};
  r.epochs.weak_supervision = {0, 0};
  r.wall_seconds = 3.0;
  const auto j = run_result_json(r, false, true);
  const auto back = run_result_from_json(j);
  EXPECT_EQ(run_result_json(back, false, true), j);
  EXPECT_FALSE(run_result_json(r, false, false).contains("wall_seconds"));
}

TEST(RunAll, ParallelMatchesSerial) {
  const auto domains = small_domains();
  std::vector<Job> jobs;
  for (Method m : {Method::no_adaptation, Method::codats, Method::calda}) {
    jobs.push_back({small_config(m), {}});
  }
  const auto serial = run_all(jobs, domains, 1, false);
  const auto parallel = run_all(jobs, domains, 3, false);
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    EXPECT_EQ(serial[i].target_auc, parallel[i].target_auc);
    EXPECT_EQ(serial[i].steps.total, parallel[i].steps.total);
  }
}

}  // namespace
}  // namespace tsdapt
