#include "tsdapt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <ranges>
#include <set>

#include "tsdapt/errors.hpp"

namespace tsdapt {

double binary_auc(std::span<const double> scores, const std::vector<bool>& positive) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Mann-Whitney U with mid-ranks for ties: U = sum of positive ranks - n+(n+ + 1)/2.
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (positive[order[k]]) {
        rank_sum += mid_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("binary_auc: need both classes");
  const double p = static_cast<double>(n_pos);
  const double u = rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(n_neg));
}

double auc_macro(const Array& scores, std::span<const int> labels) {
  if (scores.rank() != 2 || scores.dim(0) != labels.size()) {
    throw ShapeError("auc_macro: scores " + shape_string(scores.shape()) + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
  const std::set<int> present(labels.begin(), labels.end());
  if (present.size() < 2) throw std::invalid_argument("auc_macro: need at least two distinct labels");
  const std::size_t n = labels.size();
  const std::size_t width = scores.dim(1);
  std::vector<double> column(n);
  std::vector<bool> positive(n);

  if (width == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] != 0 && labels[i] != 1) throw std::invalid_argument("auc_macro: binary labels must be 0/1");
      column[i] = scores[i];
      positive[i] = labels[i] == 1;
    }
    return binary_auc(column, positive);
  }

  double total = 0.0;
  for (int c : present) {
    if (c < 0 || static_cast<std::size_t>(c) >= width) {
      throw std::out_of_range("auc_macro: label " + std::to_string(c) + " outside score columns");
    }
    for (std::size_t i = 0; i < n; ++i) {
      column[i] = scores.at(i, static_cast<std::size_t>(c));
      positive[i] = labels[i] == c;
    }
    total += binary_auc(column, positive);
  }
  return total / static_cast<double>(present.size());
}

double accuracy(const Array& predictions, std::span<const int> labels) {
  if (predictions.rank() != 2 || predictions.dim(0) != labels.size()) {
    throw ShapeError("accuracy: predictions " + shape_string(predictions.shape()) + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw std::invalid_argument("accuracy: empty input");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto row = predictions.row(i);
    const auto best = std::max_element(row.begin(), row.end()) - row.begin();
    if (best == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("mean_std: empty group");
  MeanStd out;
  out.count = values.size();
  double s = 0.0;
  for (double v : values) s += v;
  out.mean = s / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

std::vector<double> window_histogram(std::span<const double> values, double lo, double hi) {
  std::vector<double> h(kHistogramBins, 0.0);
  const double span = hi - lo;
  for (double v : values) {
    std::size_t bin = 0;
    if (span > 0.0) {
      const double pos = (v - lo) / span * static_cast<double>(kHistogramBins);
      bin = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(kHistogramBins - 1)));
    }
    h[bin] += 1.0;
  }
  double total = 0.0;
  for (double& b : h) total += (b += kHistogramSmoothing);
  for (double& b : h) b /= total;
  return h;
}

namespace {

double euclidean(const Array& a, const Array& b) {
  if (a.size() != b.size()) throw ShapeError("class_variation: windows differ in size");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

double kl(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += p[i] * std::log(p[i] / q[i]);
  return s;
}

}  // namespace

VariationReport class_variation(const std::map<int, std::vector<const Array*>>& by_label,
                                VariationMetric metric, std::size_t pair_budget,
                                std::uint64_t seed) {
  VariationReport report;
  report.metric = metric;
  for (const auto& [label, windows] : by_label) {
    const std::size_t n = windows.size();
    if (n < 2) {
      warn("class " + std::to_string(label) + " has fewer than 2 examples; omitted");
      continue;
    }
    const bool ordered = metric == VariationMetric::kl;
    const std::size_t total = ordered ? n * (n - 1) : n * (n - 1) / 2;

    // Pair p enumerates (i, j) with i < j (unordered) or i != j (ordered).
    auto decode = [n, ordered](std::size_t p) -> std::pair<std::size_t, std::size_t> {
      if (ordered) {
        const std::size_t i = p / (n - 1);
        std::size_t j = p % (n - 1);
        if (j >= i) ++j;
        return {i, j};
      }
      std::size_t i = 0;
      std::size_t row = n - 1;
      while (p >= row) {
        p -= row;
        ++i;
        --row;
      }
      return {i, i + 1 + p};
    };

    std::vector<std::size_t> chosen;
    if (total <= pair_budget) {
      chosen.resize(total);
      std::iota(chosen.begin(), chosen.end(), std::size_t{0});
    } else {
      std::mt19937_64 rng(seed + static_cast<std::uint64_t>(label));
      chosen.resize(pair_budget);
      const auto all = std::views::iota(std::size_t{0}, total);
      std::ranges::sample(all, chosen.begin(), static_cast<std::ptrdiff_t>(pair_budget), rng);
    }

    std::vector<std::vector<double>> hist;
    if (ordered) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (const Array* w : windows) {
        for (double v : w->data()) {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      }
      for (const Array* w : windows) hist.push_back(window_histogram(w->data(), lo, hi));
    }

    std::vector<double> d;
    d.reserve(chosen.size());
    for (std::size_t p : chosen) {
      const auto [i, j] = decode(p);
      d.push_back(ordered ? kl(hist[i], hist[j]) : euclidean(*windows[i], *windows[j]));
    }
    report.classes.push_back({label, n, d.size(), mean_std(d)});
  }
  return report;
}

}  // namespace tsdapt
