#pragma once

#include <string>
#include <vector>

#include "lrva/params.hpp"
#include "lrva/tensor.hpp"

namespace lrva {

// C global attention maps shared across samples and tokens. Each spatial
// token (i, j) reads the h x h window of a 2h x 2h map with top-left
// (h - i, h - j), so one map encodes a location-dependent attention pattern.
// The maps, the per-map mixing weights and the residual gate are the only
// trainable pieces; they start at an exact no-op (alpha = 0).
struct AttentionMapBank {
  Tensor maps;     // [C, 2h, 2h], init N(0, 0.02^2)
  Tensor weights;  // [C], init 0
  Tensor alpha;    // [1], init 0
  int block_index = 0;
  int grid_h = 0;

  static AttentionMapBank create(ParameterStore& store, int map_count, int grid_h,
                                 int block_index, std::uint64_t init_seed);
  int map_count() const { return maps.dim(0); }
  // C * (2h)^2 + C + 1
  std::int64_t trainable_count() const;
};

// Pure geometry helper: h x h window of a [2h, 2h] map for token (i, j).
Tensor crop_map(const Tensor& global_map, int i, int j, int h);

// Per-map [h^2, h^2] token-attention matrices, softmaxed along rows.
std::vector<Tensor> build_token_attention(const AttentionMapBank& bank);

// Applies the bank at its host block. V_spatial excludes the class token;
// f_bar is the full MHSA output (class token in row 0); out_w/out_b are the
// host block's frozen attention output projection. Returns f_bar with
// spatial rows residually updated and the class-token row passed through.
Tensor apply_domain_attention(const AttentionMapBank& bank, const Tensor& V_spatial,
                              const Tensor& f_bar, const Tensor& out_w, const Tensor& out_b);

}  // namespace lrva
