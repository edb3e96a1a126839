#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tsdapt/experiment.hpp"
#include "tsdapt/metrics.hpp"

namespace tsdapt {

enum class ReportMetric { auc, accuracy };

/// One (group, method) cell of a results table.
struct ReportCell {
  std::string mode;  // cross_person, cross_time, or single
  std::size_t n = 0;
  int gap = 0;
  std::string direction;
  std::string method;
  double mean = 0.0;
  double error = 0.0;
  std::size_t runs = 0;
  double min = 0.0;
  double max = 0.0;
};

struct MetricReport {
  ReportMetric metric = ReportMetric::auc;
  std::vector<ReportCell> cells;  // sorted by mode, group, then method order
};

/// Cross-person cells (by n and method): mean over all runs; error is the mean
/// over targets of each target's sample std across its runs. Cross-time cells
/// (by gap, direction and method): per-person means, then mean and sample std
/// across persons. Untagged runs form one cell per method.
MetricReport aggregate_report(const std::vector<RunResult>& results,
                              ReportMetric metric = ReportMetric::auc);

/// Group label of a cell, e.g. "n=2" or "gap=1 forward".
std::string group_label(const ReportCell& cell);

void write_report_csv(const std::filesystem::path& path, const MetricReport& report);
/// Aligned text table per mode: one row per group, one column per method,
/// entries "mean ± error".
std::string format_report_table(const MetricReport& report);
/// One row per run.
void write_runs_csv(const std::filesystem::path& path, const std::vector<RunResult>& results);
void write_variation_csv(const std::filesystem::path& path, const std::vector<VariationReport>& reports);

}  // namespace tsdapt
