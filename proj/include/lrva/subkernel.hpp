#pragma once

#include <span>
#include <utility>
#include <vector>

#include "lrva/backbone.hpp"
#include "lrva/tensor.hpp"

namespace lrva {

// T sub-kernels carved from the frozen patch-projection kernel K, plus the
// learned combination logits w. Sub-kernels are windows into K (no copies),
// so "only w is trainable" holds by construction.
struct SubKernelBank {
  Tensor kernel;                             // frozen K [d_model, 3, q, q]
  std::vector<std::pair<int, int>> offsets;  // top-left (row, col) per sub-kernel
  int u = 0;                                 // sub-kernel side
  Tensor w;                                  // [T] logits, init 0 (uniform mix)

  int count() const { return static_cast<int>(offsets.size()); }
  // Materialized copy of sub-kernel t (tests and diagnostics only).
  Tensor sub_kernel(int t) const;
};

// Offsets form a v x v grid of round(i * (q - u) / (v - 1)) per axis, or every
// stride-1 position when stride1 is set. Duplicate offsets (v too large for
// q - u) are an error rather than a silent merge.
SubKernelBank carve(const Tensor& kernel, int u, int v, bool stride1 = false);

// Convolves the image with every sub-kernel at stride u (each sub-kernel
// tiles the image at its own granularity): T maps of [d_model, p, p], p = H/u.
std::vector<Tensor> encode(const Tensor& image, const SubKernelBank& bank, int stride);

// Convex combination sum_t softmax(w)_t * b_t.
Tensor combine(std::span<const Tensor> maps, const Tensor& w);

// encode -> combine -> max-pool (k=2, s=2) -> flatten -> class token and
// positional encodings from the backbone. The pooled grid must equal the
// backbone grid h; anything else is a configuration error. `pool=false`
// supports the u=q, v=1 equivalence check against the original tokenizer.
TokenGrid tokenize_finegrained(const Tensor& image, const SubKernelBank& bank,
                               const VitBackbone& backbone, bool pool = true);

}  // namespace lrva
