#pragma once

#include <utility>
#include <vector>

#include "lrva/adapters.hpp"
#include "lrva/domattn.hpp"
#include "lrva/params.hpp"
#include "lrva/tensor.hpp"

namespace lrva {

struct BackboneConfig {
  int image_size = 64;
  int patch = 8;  // q
  int channels = 3;
  int d_model = 64;
  int n_heads = 4;
  int n_blocks = 8;  // L
  int mlp_ratio = 4;

  void validate() const;
  int grid() const { return image_size / patch; }           // h
  int token_count() const { return grid() * grid() + 1; }   // h^2 + class token
};

struct TokenGrid {
  Tensor tokens;  // [(h^2+1), d_model], class token in row 0
  int h = 0;
};

// Trainable attachments applied during forward. Either adapter vector is
// empty or has one entry per block; the attention bank applies at its own
// block index.
struct AdapterSet {
  std::vector<BottleneckAdapter> bottleneck;
  std::vector<LowRankAdapter> lowrank;
  const AttentionMapBank* attention = nullptr;
};

struct MhsaResult {
  Tensor out;                 // projected attention output [n, d_model]
  Tensor V;                   // fused value tensor [n, d_model]
  std::vector<Tensor> probs;  // per-head attention rows (diagnostics/tests)
};

// Toy frozen vision transformer: patch embedding via kernel K, learned
// absolute positional encodings, class token, pre-norm blocks. All
// parameters register as frozen; adaptation happens only through AdapterSet.
class VitBackbone {
 public:
  VitBackbone(const BackboneConfig& cfg, ParameterStore& store, std::uint64_t seed);

  const BackboneConfig& config() const { return cfg_; }

  TokenGrid tokenize_original(const Tensor& image) const;
  // Prepends the class token and adds positional encodings to patch tokens
  // [h^2, d_model]; shared by both tokenizers so grids stay aligned.
  TokenGrid assemble_tokens(const Tensor& patch_tokens) const;

  // Full block stack -> final class-token embedding [d_model].
  Tensor forward(const TokenGrid& grid, const AdapterSet& adapters, bool normalize) const;

  MhsaResult multi_head_attention(const Tensor& x, int block,
                                  const LowRankAdapter* lowrank = nullptr) const;

  const Tensor& patch_kernel() const { return kernel_; }
  const Tensor& patch_bias() const { return kernel_bias_; }
  const Tensor& class_token() const { return cls_; }
  const Tensor& positional() const { return pos_; }
  const Tensor& attn_out_weight(int block) const;
  const Tensor& attn_out_bias(int block) const;

 private:
  struct Block {
    Tensor ln1_g, ln1_b;
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    Tensor ln2_g, ln2_b;
    Tensor fc1_w, fc1_b, fc2_w, fc2_b;
  };

  BackboneConfig cfg_;
  Tensor kernel_;       // [d_model, 3, q, q]
  Tensor kernel_bias_;  // [d_model]
  Tensor cls_;          // [1, d_model]
  Tensor pos_;          // [(h^2+1), d_model]
  Tensor lnf_g_, lnf_b_;
  std::vector<Block> blocks_;
};

}  // namespace lrva
