#include "cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tsdapt/data.hpp"
#include "tsdapt/errors.hpp"
#include "tsdapt/experiment.hpp"
#include "tsdapt/metrics.hpp"
#include "tsdapt/report.hpp"
#include "tsdapt/synthetic.hpp"

namespace tsdapt::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kCheckpointFile = "model.ckpt";
constexpr const char* kTrainResultFile = "train.json";

std::optional<std::uint64_t> env_u64(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  try {
    std::size_t used = 0;
    const auto value = std::stoull(v, &used);
    if (used != std::string(v).size()) throw std::invalid_argument(name);
    return value;
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("{} must be a non-negative integer, got '{}'", name, v));
  }
}

/// Requested worker count, capped by TSDAPT_THREADS when set.
std::size_t thread_count(std::optional<std::size_t> requested) {
  const auto cap = env_u64("TSDAPT_THREADS");
  std::size_t n = requested.value_or(cap.value_or(1));
  if (cap) n = std::min<std::size_t>(n, *cap);
  return std::max<std::size_t>(n, 1);
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::vector<std::size_t> parse_index_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoul(item));
    } catch (const std::exception&) {
      throw ConfigError("bad index '" + item + "'");
    }
  }
  return out;
}

/// Loads an experiment config file (missing keys take defaults). The seed
/// falls back to TSDAPT_SEED when the file does not set one.
ExperimentConfig load_config(const std::optional<fs::path>& path) {
  json j = path ? read_json(*path) : json::object();
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (!j.contains("seed")) {
    if (const auto s = env_u64("TSDAPT_SEED")) j["seed"] = *s;
  }
  return j.get<ExperimentConfig>();
}

std::map<std::string, std::vector<Window>> load_domains(const fs::path& data, bool by_week) {
  return group_by_domain(read_windows_jsonl(data), by_week);
}

// --- generate ---------------------------------------------------------------

struct GenerateArgs {
  fs::path spec;
  fs::path out;
  bool raw = true;
};

void cmd_generate(const GenerateArgs& a, std::ostream& out) {
  const SyntheticSpec spec = load_synthetic_spec(a.spec);
  const auto domains = generate_synthetic(spec);
  fs::create_directories(a.out);
  std::vector<Window> all;
  for (const auto& d : domains) all.insert(all.end(), d.windows.begin(), d.windows.end());
  write_windows_jsonl(a.out / "windows.jsonl", all);
  save_synthetic_spec(a.out / "spec.json", spec);
  if (a.raw) write_synthetic_raw(a.out / "raw", domains);
  fmt::print(out, "generated {} windows over {} domains in {}\n", all.size(), domains.size(),
             a.out.string());
}

// --- preprocess -------------------------------------------------------------

struct PreprocessArgs {
  fs::path raw;
  fs::path out;
  std::optional<fs::path> map;
  double rate = 10.0;
  std::size_t length = 128;
  std::string channels;
  std::optional<double> week_origin;
};

void cmd_preprocess(const PreprocessArgs& a, std::ostream& out) {
  if (!fs::is_directory(a.raw)) throw DataError("not a directory: " + a.raw.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(a.raw)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no .csv files in " + a.raw.string());
  const std::optional<LabelMap> label_map =
      a.map ? std::optional<LabelMap>(load_label_map(*a.map)) : std::nullopt;

  std::vector<std::vector<SensorReading>> persons;
  for (const auto& f : files) {
    auto readings = ingest_csv(f);
    if (label_map) apply_label_map(readings, *label_map);
    readings = resample_and_carry_forward(readings, a.rate);
    const auto prompts = extract_prompts(readings);
    persons.push_back(assign_labels(std::move(readings), prompts));
  }
  std::vector<SensorReading> everything;
  for (const auto& p : persons) everything.insert(everything.end(), p.begin(), p.end());
  const auto vocabulary = build_vocabulary(everything);
  const auto channels = a.channels.empty() ? std::vector<std::size_t>{} : parse_index_list(a.channels);

  std::vector<Window> windows;
  for (const auto& p : persons) {
    auto w = segment_windows(p, a.length, vocabulary, channels, a.week_origin);
    windows.insert(windows.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  write_windows_jsonl(a.out, windows);
  json vocab = json::object();
  for (const auto& [name, index] : vocabulary) vocab[name] = index;
  write_json(a.out.string() + ".labels.json", vocab);
  std::size_t labeled = std::count_if(windows.begin(), windows.end(),
                                      [](const Window& w) { return w.label.has_value(); });
  fmt::print(out, "{} persons, {} windows ({} labeled), {} classes -> {}\n", persons.size(),
             windows.size(), labeled, vocabulary.size(), a.out.string());
}

// --- train / evaluate -------------------------------------------------------

struct TrainArgs {
  std::optional<fs::path> config;
  fs::path data;
  fs::path out;
  std::optional<std::string> method;
  std::vector<std::string> sources;
  std::optional<std::string> target;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  bool verbose = false;
};

void cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  ExperimentConfig config = load_config(a.config);
  if (a.method) config.method = parse_method(*a.method);
  if (!a.sources.empty()) config.sources = a.sources;
  if (a.target) config.target = *a.target;
  if (a.seed) config.seed = *a.seed;
  if (a.epochs) config.epochs = *a.epochs;
  if (config.target.empty()) throw ConfigError("no target domain (use --target)");

  const auto domains = load_domains(a.data, config.by_week);
  if (config.sources.empty() && config.method != Method::train_on_target) {
    for (const auto& [id, _] : domains) {
      if (id != config.target) config.sources.push_back(id);
    }
  }
  const ProblemData data = prepare_problem(config, domains);
  const auto started = std::chrono::steady_clock::now();
  TrainedModel trained = train(config, data);
  evaluate(trained.model, data, trained.result);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  fs::create_directories(a.out);
  Checkpoint ckpt{trained.model, trained.optimizer,
                  json{{"config", trained.result.config},
                       {"selected_epoch", trained.result.selected_epoch}}};
  save_checkpoint(a.out / kCheckpointFile, ckpt);
  write_json(a.out / kTrainResultFile, run_result_json(trained.result, true, false));
  if (a.verbose) fmt::print(err, "trained in {:.1f}s\n", secs);
  fmt::print(out, "{} {} -> {}: target AUC {:.4f}, accuracy {:.4f} (epoch {})\n",
             to_string(config.method), fmt::join(config.sources, ","), config.target,
             trained.result.target_auc, trained.result.target_accuracy,
             trained.result.selected_epoch);
}

struct EvaluateArgs {
  fs::path ckpt;
  fs::path data;
  fs::path out;
};

void cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const fs::path file = fs::is_directory(a.ckpt) ? a.ckpt / kCheckpointFile : a.ckpt;
  const Checkpoint ckpt = load_checkpoint(file);
  if (!ckpt.metadata.contains("config")) throw FormatError("checkpoint has no experiment config");
  const auto config = ckpt.metadata.at("config").get<ExperimentConfig>();
  const auto domains = load_domains(a.data, config.by_week);
  const ProblemData data = prepare_problem(config, domains);
  RunResult result;
  result.config = config;
  result.selected_epoch = ckpt.metadata.value("selected_epoch", std::size_t{0});
  evaluate(ckpt.model, data, result);
  write_json(a.out, run_result_json(result, false, false));
  fmt::print(out, "{}: target AUC {:.4f}, accuracy {:.4f}\n", config.target, result.target_auc,
             result.target_accuracy);
}

// --- protocol ---------------------------------------------------------------

struct ProtocolArgs {
  std::string mode;
  fs::path data;
  fs::path out;
  std::optional<fs::path> config;
  std::vector<std::string> methods;
  std::vector<std::size_t> n;
  std::size_t targets = 10;
  std::size_t sets = 3;
  std::size_t seeds = 1;
  std::vector<std::string> directions;
  std::optional<std::size_t> threads;
  bool traces = false;
  bool verbose = false;
};

void cmd_protocol(const ProtocolArgs& a, std::ostream& out) {
  ProtocolOptions o;
  o.base = load_config(a.config);
  if (!a.methods.empty()) {
    o.methods.clear();
    for (const auto& m : a.methods) o.methods.push_back(parse_method(m));
  }
  if (!a.n.empty()) o.source_counts = a.n;
  o.targets_count = a.targets;
  o.sets_per_target = a.sets;
  o.seeds = a.seeds;
  if (!a.directions.empty()) {
    o.directions.clear();
    for (const auto& d : a.directions) o.directions.push_back(parse_direction(d));
  }
  o.threads = thread_count(a.threads);
  o.verbose = a.verbose;

  const auto windows = read_windows_jsonl(a.data);
  const auto results = a.mode == "cross_person" ? run_cross_person(windows, o) : run_cross_time(windows, o);
  fs::create_directories(a.out / "runs");
  for (std::size_t i = 0; i < results.size(); ++i) {
    write_json(a.out / "runs" / fmt::format("{:05d}.json", i), run_result_json(results[i], a.traces, false));
  }
  write_runs_csv(a.out / "runs.csv", results);
  fmt::print(out, "{} runs written to {}\n\n{}", results.size(), a.out.string(),
             format_report_table(aggregate_report(results)));
}

// --- variation --------------------------------------------------------------

struct VariationArgs {
  fs::path data;
  fs::path out;
  std::size_t pairs = kDefaultPairBudget;
  std::uint64_t seed = 0;
};

void cmd_variation(const VariationArgs& a, std::ostream& out) {
  const auto windows = read_windows_jsonl(a.data);
  std::map<int, std::vector<const Array*>> by_label;
  for (const auto& w : windows) {
    if (w.label) by_label[*w.label].push_back(&w.values);
  }
  if (by_label.empty()) throw DataError("no labeled windows in " + a.data.string());
  std::vector<VariationReport> reports;
  for (auto metric : {VariationMetric::euclidean, VariationMetric::kl}) {
    reports.push_back(class_variation(by_label, metric, a.pairs, a.seed));
  }
  write_variation_csv(a.out, reports);
  fmt::print(out, "{:>6}  {:>8}  {:>22}  {:>22}\n", "class", "examples", "euclidean", "kl");
  for (std::size_t i = 0; i < reports[0].classes.size(); ++i) {
    const auto& e = reports[0].classes[i];
    const auto& k = reports[1].classes[i];
    fmt::print(out, "{:>6}  {:>8}  {:>10.4f} ± {:<9.4f}  {:>10.4f} ± {:<9.4f}\n", e.label, e.examples,
               e.distance.mean, e.distance.std, k.distance.mean, k.distance.std);
  }
}

// --- report -----------------------------------------------------------------

struct ReportArgs {
  fs::path results;
  fs::path out;
  std::string metric = "auc";
};

void cmd_report(const ReportArgs& a, std::ostream& out) {
  if (!fs::exists(a.results)) throw DataError("no such path: " + a.results.string());
  std::vector<fs::path> files;
  if (fs::is_directory(a.results)) {
    for (const auto& e : fs::recursive_directory_iterator(a.results)) {
      if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
  } else {
    files.push_back(a.results);
  }
  std::sort(files.begin(), files.end());
  std::vector<RunResult> results;
  for (const auto& f : files) {
    const json j = read_json(f);
    if (j.is_object() && j.contains("target_auc")) results.push_back(run_result_from_json(j));
  }
  if (results.empty()) throw DataError("no run results under " + a.results.string());
  const ReportMetric metric = a.metric == "auc" ? ReportMetric::auc : ReportMetric::accuracy;
  const auto report = aggregate_report(results, metric);
  const std::string table = format_report_table(report);
  fs::create_directories(a.out);
  write_report_csv(a.out / fmt::format("report_{}.csv", a.metric), report);
  write_text(a.out / fmt::format("report_{}.txt", a.metric), table);
  fmt::print(out, "{} runs\n\n{}", results.size(), table);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Time-series domain adaptation experiments"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Emit a synthetic multi-domain benchmark");
  g->add_option("--spec", gen.spec, "Synthetic spec JSON")->required()->check(CLI::ExistingFile);
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_flag("!--no-raw", gen.raw, "Skip the raw per-person CSV export");

  PreprocessArgs pre;
  auto* p = app.add_subcommand("preprocess", "Turn raw sensor CSVs into labeled windows");
  p->add_option("--raw", pre.raw, "Directory of per-person CSV files")->required();
  p->add_option("--out", pre.out, "Output windows JSONL")->required();
  p->add_option("--map", pre.map, "Label map JSON (name -> name or null)")->check(CLI::ExistingFile);
  p->add_option("--rate", pre.rate, "Input sample rate in Hz")->check(CLI::PositiveNumber);
  p->add_option("--length", pre.length, "Window length in samples")->check(CLI::PositiveNumber);
  p->add_option("--channels", pre.channels, "Comma-separated motion channel indices");
  p->add_option("--week-origin", pre.week_origin, "UTC seconds of week 0 (default: first reading per person)");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train one model and save a checkpoint");
  t->add_option("--config", tr.config, "Experiment config JSON")->check(CLI::ExistingFile);
  t->add_option("--data", tr.data, "Windows JSONL")->required();
  t->add_option("--out", tr.out, "Checkpoint directory")->required();
  t->add_option("--method", tr.method, "Training method");
  t->add_option("--sources", tr.sources, "Source domains")->delimiter(',');
  t->add_option("--target", tr.target, "Target domain");
  t->add_option("--seed", tr.seed, "Run seed");
  t->add_option("--epochs", tr.epochs, "Epoch count")->check(CLI::PositiveNumber);
  t->add_flag("-v,--verbose", tr.verbose);

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Score a checkpoint on its target test split");
  e->add_option("--ckpt", ev.ckpt, "Checkpoint directory or file")->required()->check(CLI::ExistingPath);
  e->add_option("--data", ev.data, "Windows JSONL")->required();
  e->add_option("--out", ev.out, "Result JSON")->required();

  ProtocolArgs pr;
  auto* r = app.add_subcommand("protocol", "Run a cross-person or cross-time sweep");
  r->add_option("--mode", pr.mode)->required()->check(CLI::IsMember({"cross_person", "cross_time"}));
  r->add_option("--data", pr.data, "Windows JSONL")->required();
  r->add_option("--out", pr.out, "Results directory")->required();
  r->add_option("--config", pr.config, "Base experiment config JSON")->check(CLI::ExistingFile);
  r->add_option("--methods", pr.methods, "Methods to run (default: all)")->delimiter(',');
  r->add_option("--n", pr.n, "Source counts for cross-person")->delimiter(',');
  r->add_option("--targets", pr.targets, "Targets per n")->check(CLI::PositiveNumber);
  r->add_option("--sets", pr.sets, "Source sets per target")->check(CLI::PositiveNumber);
  r->add_option("--seeds", pr.seeds, "Repeats per problem")->check(CLI::PositiveNumber);
  r->add_option("--directions", pr.directions, "forward,backward")->delimiter(',');
  r->add_option("--threads", pr.threads, "Parallel runs (capped by TSDAPT_THREADS)")->check(CLI::PositiveNumber);
  r->add_flag("--traces", pr.traces, "Store loss traces in run files");
  r->add_flag("-v,--verbose", pr.verbose);

  VariationArgs va;
  auto* v = app.add_subcommand("variation", "Per-class Euclidean and KL variation of raw windows");
  v->add_option("--data", va.data, "Windows JSONL")->required();
  v->add_option("--out", va.out, "Output CSV")->required();
  v->add_option("--pairs", va.pairs, "Pair budget per class")->check(CLI::PositiveNumber);
  v->add_option("--seed", va.seed, "Subsampling seed");

  ReportArgs re;
  auto* rp = app.add_subcommand("report", "Aggregate run results into tables");
  rp->add_option("--results", re.results, "Results directory or file")->required();
  rp->add_option("--out", re.out, "Output directory")->required();
  rp->add_option("--metric", re.metric)->check(CLI::IsMember({"auc", "accuracy"}));

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*g) cmd_generate(gen, out);
    if (*p) cmd_preprocess(pre, out);
    if (*t) cmd_train(tr, out, err);
    if (*e) cmd_evaluate(ev, out);
    if (*r) cmd_protocol(pr, out);
    if (*v) cmd_variation(va, out);
    if (*rp) cmd_report(re, out);
  } catch (const NumericError& ex) {
    fmt::print(err, "numeric failure: {}\n", ex.what());
    return kExitNumeric;
  } catch (const ConfigError& ex) {
    fmt::print(err, "configuration error: {}\n", ex.what());
    return kExitUsage;
  } catch (const DataError& ex) {
    fmt::print(err, "data error: {}\n", ex.what());
    return kExitData;
  } catch (const FormatError& ex) {
    fmt::print(err, "checkpoint error: {}\n", ex.what());
    return kExitData;
  } catch (const ShapeError& ex) {
    fmt::print(err, "shape error: {}\n", ex.what());
    return kExitData;
  } catch (const std::exception& ex) {
    fmt::print(err, "error: {}\n", ex.what());
    return kExitData;
  }
  return kExitOk;
}

}  // namespace tsdapt::cli
