#include "lrva/metrics.hpp"

#include <cstdio>
#include <stdexcept>

namespace lrva {

namespace {

// 1-indexed rank of `target` within `scores` under descending order, ties
// broken toward the lower index.
int rank_of(const double* scores, int n, int target) {
  const double pivot = scores[target];
  int ahead = 0;
  for (int i = 0; i < n; ++i) {
    if (scores[i] > pivot || (scores[i] == pivot && i < target)) ++ahead;
  }
  return ahead + 1;
}

}  // namespace

double topk_accuracy(const Tensor& scores, const std::vector<int>& labels, int k) {
  if (scores.rank() != 2) throw std::invalid_argument("topk_accuracy: scores must be [n, classes]");
  const int n = scores.dim(0), classes = scores.dim(1);
  if (k < 1 || k > classes) throw std::invalid_argument("topk_accuracy: k must be in [1, classes]");
  if (static_cast<int>(labels.size()) != n) {
    throw std::invalid_argument("topk_accuracy: label count mismatch");
  }
  int hits = 0;
  for (int i = 0; i < n; ++i) {
    const int label = labels[static_cast<std::size_t>(i)];
    if (label < 0 || label >= classes) throw std::invalid_argument("topk_accuracy: label out of range");
    if (rank_of(scores.data() + static_cast<std::ptrdiff_t>(i) * classes, classes, label) <= k) {
      ++hits;
    }
  }
  return 100.0 * hits / n;
}

namespace {

RetrievalResult one_direction(const Tensor& s, const std::vector<int>& gt) {
  const int nq = s.dim(0), ng = s.dim(1);
  RetrievalResult out;
  for (int q = 0; q < nq; ++q) {
    const int rank = rank_of(s.data() + static_cast<std::ptrdiff_t>(q) * ng, ng,
                             gt[static_cast<std::size_t>(q)]);
    out.r_at_1 += rank <= 1 ? 1.0 : 0.0;
    out.r_at_5 += rank <= 5 ? 1.0 : 0.0;
    out.mean_rank += rank;
  }
  out.r_at_1 *= 100.0 / nq;
  out.r_at_5 *= 100.0 / nq;
  out.mean_rank /= nq;
  return out;
}

}  // namespace

RetrievalResult retrieval_metrics(const Tensor& similarity, const std::vector<int>& ground_truth,
                                  bool bidirectional) {
  if (similarity.rank() != 2) {
    throw std::invalid_argument("retrieval_metrics: similarity must be [queries, gallery]");
  }
  const int nq = similarity.dim(0), ng = similarity.dim(1);
  if (static_cast<int>(ground_truth.size()) != nq) {
    throw std::invalid_argument("retrieval_metrics: pairing size mismatch");
  }
  std::vector<int> inverse(static_cast<std::size_t>(ng), -1);
  for (int q = 0; q < nq; ++q) {
    const int g = ground_truth[static_cast<std::size_t>(q)];
    if (g < 0 || g >= ng) throw std::invalid_argument("retrieval_metrics: gallery index out of range");
    if (inverse[static_cast<std::size_t>(g)] != -1) {
      throw std::invalid_argument("retrieval_metrics: pairing is not bijective");
    }
    inverse[static_cast<std::size_t>(g)] = q;
  }

  RetrievalResult forward = one_direction(similarity, ground_truth);
  if (!bidirectional) return forward;

  if (nq != ng) {
    throw std::invalid_argument("retrieval_metrics: bidirectional needs a square pairing");
  }
  Tensor st = Tensor::zeros({ng, nq});
  for (int q = 0; q < nq; ++q) {
    for (int g = 0; g < ng; ++g) {
      st.vec()[static_cast<std::size_t>(g) * nq + q] =
          similarity.vec()[static_cast<std::size_t>(q) * ng + g];
    }
  }
  RetrievalResult backward = one_direction(st, inverse);
  return {(forward.r_at_1 + backward.r_at_1) / 2.0, (forward.r_at_5 + backward.r_at_5) / 2.0,
          (forward.mean_rank + backward.mean_rank) / 2.0};
}

std::string format_metric_value(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", value);
  return buf;
}

std::string metrics_csv(const std::vector<CsvRow>& rows, const std::string& config_text) {
  std::string out;
  std::string line;
  for (char c : config_text) {
    if (c == '\n') {
      out += "# " + line + "\n";
      line.clear();
    } else {
      line += c;
    }
  }
  if (!line.empty()) out += "# " + line + "\n";
  out += "task,split,metric,value,seed\n";
  for (const CsvRow& r : rows) {
    out += r.task + "," + r.split + "," + r.metric + "," + format_metric_value(r.value) + "," +
           std::to_string(r.seed) + "\n";
  }
  return out;
}

}  // namespace lrva
