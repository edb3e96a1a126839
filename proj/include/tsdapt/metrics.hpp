#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tsdapt/array.hpp"

namespace tsdapt {

/// Macro one-vs-rest AUC from rank statistics; tied scores count 1/2.
/// `scores` is [count x L]; classes absent from `labels` are skipped. A
/// single-column score array is treated as the positive-class score of a
/// binary problem with labels {0, 1}. Throws if fewer than two distinct
/// labels are present.
double auc_macro(const Array& scores, std::span<const int> labels);

/// One-vs-rest AUC of `scores` for the rows flagged positive.
double binary_auc(std::span<const double> scores, const std::vector<bool>& positive);

/// Fraction of rows whose argmax (lowest index on ties) equals the label.
double accuracy(const Array& predictions, std::span<const int> labels);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single value
  std::size_t count = 0;
};

MeanStd mean_std(std::span<const double> values);

enum class VariationMetric { euclidean, kl };

struct ClassVariation {
  int label = 0;
  std::size_t examples = 0;
  std::size_t pairs = 0;
  MeanStd distance;
};

struct VariationReport {
  VariationMetric metric = VariationMetric::euclidean;
  std::vector<ClassVariation> classes;
};

inline constexpr std::size_t kDefaultPairBudget = 25000;
inline constexpr std::size_t kHistogramBins = 32;
inline constexpr double kHistogramSmoothing = 1e-6;

/// Per-class spread of raw windows. Euclidean uses unordered pairs of
/// flattened values; KL uses ordered pairs of per-window histograms (32 bins
/// over the class's value range, +1e-6 per bin, renormalized). When a class
/// has more pairs than `pair_budget`, a seeded uniform subset is used. Classes
/// with fewer than two examples are omitted with a warning.
VariationReport class_variation(const std::map<int, std::vector<const Array*>>& by_label,
                                VariationMetric metric, std::size_t pair_budget,
                                std::uint64_t seed);

/// Normalized 32-bin histogram of `values` over [lo, hi].
std::vector<double> window_histogram(std::span<const double> values, double lo, double hi);

}  // namespace tsdapt
