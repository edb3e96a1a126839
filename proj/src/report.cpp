#include "tsdapt/report.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <tuple>

#include <fmt/format.h>

#include "tsdapt/errors.hpp"

namespace tsdapt {

namespace {

int method_rank(const std::string& name) {
  static const std::vector<std::string> order{"no_adaptation", "codats", "codats_ws",
                                              "calda",         "calda_ws", "train_on_target"};
  const auto it = std::find(order.begin(), order.end(), name);
  return static_cast<int>(it - order.begin());
}

double value_of(const RunResult& r, ReportMetric m) {
  return m == ReportMetric::auc ? r.target_auc : r.target_accuracy;
}

using CellKey = std::tuple<std::string, std::size_t, int, std::string, int>;  // mode, n, gap, dir, method

ReportCell finish(const CellKey& key, const std::vector<double>& all, double mean, double error) {
  ReportCell c;
  c.mode = std::get<0>(key);
  c.n = std::get<1>(key);
  c.gap = std::get<2>(key);
  c.direction = std::get<3>(key);
  c.mean = mean;
  c.error = error;
  c.runs = all.size();
  c.min = *std::min_element(all.begin(), all.end());
  c.max = *std::max_element(all.begin(), all.end());
  return c;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

}  // namespace

std::string group_label(const ReportCell& cell) {
  if (cell.mode == "cross_person") return fmt::format("n={}", cell.n);
  if (cell.mode == "cross_time") return fmt::format("gap={} {}", cell.gap, cell.direction);
  return "all";
}

MetricReport aggregate_report(const std::vector<RunResult>& results, ReportMetric metric) {
  if (results.empty()) throw std::invalid_argument("aggregate_report: no results");
  // Cell -> subgroup (target or person) -> values.
  std::map<CellKey, std::map<std::string, std::vector<double>>> groups;
  std::map<CellKey, std::string> method_names;
  for (const auto& r : results) {
    const std::string method(to_string(r.config.method));
    const std::string mode = r.tag.mode.empty() ? "single" : r.tag.mode;
    CellKey key{mode, mode == "cross_person" ? r.tag.n : 0, mode == "cross_time" ? r.tag.gap : 0,
                mode == "cross_time" ? r.tag.direction : "", method_rank(method)};
    const std::string sub = mode == "cross_time" ? r.tag.person : r.config.target;
    groups[key][sub].push_back(value_of(r, metric));
    method_names[key] = method;
  }

  MetricReport report;
  report.metric = metric;
  for (const auto& [key, subs] : groups) {
    std::vector<double> all;
    for (const auto& [_, v] : subs) all.insert(all.end(), v.begin(), v.end());
    ReportCell cell;
    if (std::get<0>(key) == "cross_time") {
      std::vector<double> person_means;
      for (const auto& [_, v] : subs) person_means.push_back(mean_std(v).mean);
      const MeanStd ms = mean_std(person_means);
      cell = finish(key, all, ms.mean, ms.std);
    } else {
      double err = 0.0;
      for (const auto& [_, v] : subs) err += mean_std(v).std;
      cell = finish(key, all, mean_std(all).mean, err / static_cast<double>(subs.size()));
    }
    cell.method = method_names.at(key);
    report.cells.push_back(std::move(cell));
  }
  return report;
}

void write_report_csv(const std::filesystem::path& path, const MetricReport& report) {
  auto out = open_out(path);
  out << "mode,n,gap,direction,method,metric,mean,error,runs,min,max\n";
  const char* metric = report.metric == ReportMetric::auc ? "auc" : "accuracy";
  for (const auto& c : report.cells) {
    out << fmt::format("{},{},{},{},{},{},{:.6f},{:.6f},{},{:.6f},{:.6f}\n", c.mode, c.n, c.gap,
                       c.direction, c.method, metric, c.mean, c.error, c.runs, c.min, c.max);
  }
}

std::string format_report_table(const MetricReport& report) {
  std::string text;
  std::vector<std::string> modes;
  for (const auto& c : report.cells) {
    if (std::find(modes.begin(), modes.end(), c.mode) == modes.end()) modes.push_back(c.mode);
  }
  for (const auto& mode : modes) {
    std::vector<std::string> methods;
    std::vector<std::string> rows;
    std::map<std::pair<std::string, std::string>, std::string> entries;
    for (const auto& c : report.cells) {
      if (c.mode != mode) continue;
      const std::string g = group_label(c);
      if (std::find(rows.begin(), rows.end(), g) == rows.end()) rows.push_back(g);
      if (std::find(methods.begin(), methods.end(), c.method) == methods.end()) methods.push_back(c.method);
      entries[{g, c.method}] = fmt::format("{:.3f} ± {:.3f}", c.mean, c.error);
    }
    std::sort(methods.begin(), methods.end(),
              [](const auto& a, const auto& b) { return method_rank(a) < method_rank(b); });

    std::size_t first = 5;
    for (const auto& r : rows) first = std::max(first, r.size());
    std::vector<std::size_t> widths;
    for (const auto& m : methods) {
      std::size_t w = m.size();
      for (const auto& r : rows) {
        const auto it = entries.find({r, m});
        // "±" is two bytes but one column.
        if (it != entries.end()) w = std::max(w, it->second.size() - 1);
      }
      widths.push_back(w);
    }
    text += fmt::format("{} ({})\n", mode, report.metric == ReportMetric::auc ? "AUC" : "accuracy");
    text += fmt::format("{:<{}}", "group", first);
    for (std::size_t i = 0; i < methods.size(); ++i) text += fmt::format("  {:>{}}", methods[i], widths[i]);
    text += "\n";
    for (const auto& r : rows) {
      text += fmt::format("{:<{}}", r, first);
      for (std::size_t i = 0; i < methods.size(); ++i) {
        const auto it = entries.find({r, methods[i]});
        const std::string cell = it == entries.end() ? "-" : it->second;
        const std::size_t shown = it == entries.end() ? 1 : cell.size() - 1;
        text += "  " + std::string(widths[i] - std::min(widths[i], shown), ' ') + cell;
      }
      text += "\n";
    }
    text += "\n";
  }
  return text;
}

void write_runs_csv(const std::filesystem::path& path, const std::vector<RunResult>& results) {
  auto out = open_out(path);
  out << "mode,n,source_set,person,gap,direction,method,seed,target,sources,auc,accuracy,selected_epoch\n";
  for (const auto& r : results) {
    std::string sources;
    for (const auto& s : r.config.sources) sources += (sources.empty() ? "" : ";") + s;
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{:.6f},{:.6f},{}\n", r.tag.mode, r.tag.n,
                       r.tag.source_set, r.tag.person, r.tag.gap, r.tag.direction,
                       to_string(r.config.method), r.config.seed, r.config.target, sources,
                       r.target_auc, r.target_accuracy, r.selected_epoch);
  }
}

void write_variation_csv(const std::filesystem::path& path, const std::vector<VariationReport>& reports) {
  auto out = open_out(path);
  out << "metric,class,examples,pairs,mean,std\n";
  for (const auto& rep : reports) {
    const char* name = rep.metric == VariationMetric::euclidean ? "euclidean" : "kl";
    for (const auto& c : rep.classes) {
      out << fmt::format("{},{},{},{},{:.6f},{:.6f}\n", name, c.label, c.examples, c.pairs,
                         c.distance.mean, c.distance.std);
    }
  }
}

}  // namespace tsdapt
