#pragma once

#include <string>
#include <vector>

#include "lrva/params.hpp"
#include "lrva/tensor.hpp"

namespace lrva {

// Parallel residual bottleneck on a block's MLP sublayer:
//   adapt(x) = x + scale * act(x @ down) @ up
// `up` starts at zero so the adapter is an exact no-op at step 0; the
// activation is the same smooth ramp (gelu) the backbone MLP uses.
struct BottleneckAdapter {
  Tensor down;   // [d_model, d_bottleneck]
  Tensor up;     // [d_bottleneck, d_model]
  Tensor scale;  // [1]

  static BottleneckAdapter create(ParameterStore& store, const std::string& prefix, int d_model,
                                  int d_bottleneck, std::uint64_t init_seed);
  Tensor adapt(const Tensor& x) const;
  // 2 * d_model * d_bottleneck + 1
  std::int64_t trainable_count() const;
};

// Low-rank deltas added to the frozen query and value projections:
//   q' = q + x @ a_q @ b_q, v' = v + x @ a_v @ b_v
// The `b_*` factors start at zero (no-op at step 0).
struct LowRankAdapter {
  Tensor a_q, b_q;  // [d_model, rank], [rank, d_model]
  Tensor a_v, b_v;

  static LowRankAdapter create(ParameterStore& store, const std::string& prefix, int d_model,
                               int rank, std::uint64_t init_seed);
  Tensor delta_q(const Tensor& x) const;
  Tensor delta_v(const Tensor& x) const;
  std::int64_t trainable_count() const;
};

// Affine classifier head over pooled embeddings.
struct LinearHead {
  Tensor weight;  // [d_model, n_classes]
  Tensor bias;    // [n_classes]

  static LinearHead create(ParameterStore& store, const std::string& prefix, int d_model,
                           int n_classes, std::uint64_t init_seed);
  // features [n, d_model] (or [d_model]) -> logits [n, n_classes]
  Tensor logits(const Tensor& features) const;
  std::int64_t trainable_count() const;
};

struct ProbeOptions {
  int steps = 200;
  double lr = 1e-2;
  std::uint64_t seed = 0;
};

// Trains a standalone affine head on frozen precomputed features with the
// classification task loss. Labels out of [0, n_classes) are an error.
LinearHead linear_probe(const Tensor& features, const std::vector<int>& labels, int n_classes,
                        const ProbeOptions& opts = {});

}  // namespace lrva
