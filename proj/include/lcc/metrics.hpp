#pragma once

#include <optional>
#include <string>
#include <vector>

namespace lcc {

struct TopKAccuracy {
  std::size_t k = 1;
  double instance = 0.0;
  /// Mean over classes present in the labels of each class's top-k recall.
  double per_class = 0.0;
};

struct Metrics {
  std::size_t samples = 0;
  std::vector<TopKAccuracy> topk;
  std::vector<std::size_t> class_counts;  // samples per class
  std::vector<std::size_t> class_top1;    // top-1 hits per class

  const TopKAccuracy& at(std::size_t k) const;
};

/// Position of `label` when scores are ranked descending, ties going to the lower index.
std::size_t rank_of(const std::vector<double>& scores, std::size_t label);

/// `scores[i]` are the class scores of sample i.
Metrics evaluate_scores(const std::vector<std::vector<double>>& scores, const std::vector<std::size_t>& labels,
                        const std::vector<std::size_t>& ks);

/// Weighted mean of per-stream score vectors; uniform when no weights are given.
std::vector<double> ensemble_streams(const std::vector<std::vector<double>>& streams,
                                     const std::optional<std::vector<double>>& weights = std::nullopt);

std::string metrics_csv_header(const std::vector<std::size_t>& ks);
std::string metrics_csv_row(const std::string& split, const std::string& stream, const Metrics& m);

/// %.9g, the number format of every CSV export.
std::string format_csv_number(double v);

}  // namespace lcc
