#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lrva/tensor.hpp"

namespace lrva {

// Percentages on a 0-100 scale; mean_rank is the average 1-indexed rank of
// the ground truth (1 = perfect). Retrieval fields are 0 for classification
// reports and vice versa.
struct MetricReport {
  double top1 = 0.0;
  double top5 = 0.0;
  double r_at_1 = 0.0;
  double r_at_5 = 0.0;
  double mean_rank = 0.0;
};

// Fraction of rows (as a percentage) whose label lands in the k highest
// scores. Ties break toward the lower class index so results are
// reproducible on degenerate score matrices.
double topk_accuracy(const Tensor& scores, const std::vector<int>& labels, int k);

struct RetrievalResult {
  double r_at_1 = 0.0;
  double r_at_5 = 0.0;
  double mean_rank = 0.0;
};

// Ranks ground-truth gallery items under descending similarity (ties break
// toward the lower gallery index). ground_truth[q] is the gallery index for
// query q and must be a bijection. When bidirectional, metrics are computed
// on the matrix and its transpose (with the inverse pairing) and averaged.
RetrievalResult retrieval_metrics(const Tensor& similarity, const std::vector<int>& ground_truth,
                                  bool bidirectional);

struct CsvRow {
  std::string task;
  std::string split;
  std::string metric;
  double value = 0.0;
  std::uint64_t seed = 0;
};

// CSV with header task,split,metric,value,seed; the experiment config is
// embedded verbatim above the header as '#'-prefixed comment lines so every
// artifact is self-describing.
std::string metrics_csv(const std::vector<CsvRow>& rows, const std::string& config_text);

std::string format_metric_value(double value);

}  // namespace lrva
