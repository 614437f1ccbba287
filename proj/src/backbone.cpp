#include "lrva/backbone.hpp"

#include <cmath>
#include <stdexcept>

#include "lrva/ops.hpp"
#include "lrva/rng.hpp"

namespace lrva {

void BackboneConfig::validate() const {
  if (image_size < 1 || patch < 1 || d_model < 1 || n_heads < 1 || n_blocks < 1 || mlp_ratio < 1) {
    throw std::invalid_argument("backbone: all extents must be positive");
  }
  if (channels != 3) throw std::invalid_argument("backbone: only 3-channel images supported");
  if (image_size % patch != 0) {
    throw std::invalid_argument("backbone: image_size " + std::to_string(image_size) +
                                " not divisible by patch " + std::to_string(patch));
  }
  if (d_model % n_heads != 0) {
    throw std::invalid_argument("backbone: d_model " + std::to_string(d_model) +
                                " not divisible by n_heads " + std::to_string(n_heads));
  }
}

namespace {

// Per-parameter init stream keyed by name so values do not depend on
// registration order or on which adapters are enabled.
Tensor init_normal(const std::string& name, Shape shape, double stddev, std::uint64_t seed) {
  Rng rng(derive_seed(seed, name));
  return Tensor::randn(std::move(shape), rng, stddev);
}

Tensor init_glorot(const std::string& name, Shape shape, int fan_in, int fan_out,
                   std::uint64_t seed) {
  return init_normal(name, std::move(shape), std::sqrt(2.0 / (fan_in + fan_out)), seed);
}

}  // namespace

VitBackbone::VitBackbone(const BackboneConfig& cfg, ParameterStore& store, std::uint64_t seed)
    : cfg_(cfg) {
  cfg_.validate();
  const int d = cfg_.d_model;
  const int q = cfg_.patch;
  const int hidden = d * cfg_.mlp_ratio;
  const int fan_patch = cfg_.channels * q * q;

  auto addf = [&](const std::string& name, Tensor t) -> Tensor& {
    return store.add(name, std::move(t), /*frozen=*/true);
  };

  kernel_ = addf("backbone.patch.kernel",
                 init_glorot("backbone.patch.kernel", {d, cfg_.channels, q, q}, fan_patch, d, seed));
  kernel_bias_ = addf("backbone.patch.bias", Tensor::zeros({d}));
  cls_ = addf("backbone.cls", init_normal("backbone.cls", {1, d}, 0.2, seed));
  pos_ = addf("backbone.pos", init_normal("backbone.pos", {cfg_.token_count(), d}, 0.2, seed));

  blocks_.resize(static_cast<std::size_t>(cfg_.n_blocks));
  for (int l = 0; l < cfg_.n_blocks; ++l) {
    const std::string p = "backbone.blocks." + std::to_string(l) + ".";
    Block& b = blocks_[static_cast<std::size_t>(l)];
    b.ln1_g = addf(p + "ln1.gain", Tensor::full({d}, 1.0));
    b.ln1_b = addf(p + "ln1.bias", Tensor::zeros({d}));
    b.wq = addf(p + "attn.wq", init_glorot(p + "attn.wq", {d, d}, d, d, seed));
    b.bq = addf(p + "attn.bq", Tensor::zeros({d}));
    b.wk = addf(p + "attn.wk", init_glorot(p + "attn.wk", {d, d}, d, d, seed));
    b.bk = addf(p + "attn.bk", Tensor::zeros({d}));
    b.wv = addf(p + "attn.wv", init_glorot(p + "attn.wv", {d, d}, d, d, seed));
    b.bv = addf(p + "attn.bv", Tensor::zeros({d}));
    b.wo = addf(p + "attn.wo", init_glorot(p + "attn.wo", {d, d}, d, d, seed));
    b.bo = addf(p + "attn.bo", Tensor::zeros({d}));
    b.ln2_g = addf(p + "ln2.gain", Tensor::full({d}, 1.0));
    b.ln2_b = addf(p + "ln2.bias", Tensor::zeros({d}));
    b.fc1_w = addf(p + "mlp.fc1.weight", init_glorot(p + "mlp.fc1.weight", {d, hidden}, d, hidden, seed));
    b.fc1_b = addf(p + "mlp.fc1.bias", Tensor::zeros({hidden}));
    b.fc2_w = addf(p + "mlp.fc2.weight", init_glorot(p + "mlp.fc2.weight", {hidden, d}, hidden, d, seed));
    b.fc2_b = addf(p + "mlp.fc2.bias", Tensor::zeros({d}));
  }
  lnf_g_ = addf("backbone.ln_final.gain", Tensor::full({d}, 1.0));
  lnf_b_ = addf("backbone.ln_final.bias", Tensor::zeros({d}));
}

TokenGrid VitBackbone::tokenize_original(const Tensor& image) const {
  if (image.rank() != 3 || image.dim(0) != cfg_.channels || image.dim(1) != cfg_.image_size ||
      image.dim(2) != cfg_.image_size) {
    throw std::invalid_argument("backbone: image must be [3," + std::to_string(cfg_.image_size) +
                                "," + std::to_string(cfg_.image_size) + "], got " +
                                shape_str(image.shape()));
  }
  Tensor fm = conv2d(image, kernel_, cfg_.patch);        // [d, h, h]
  Tensor patch_tokens = tokens_from_feature_map(fm);     // [h^2, d]
  return assemble_tokens(add_bias(patch_tokens, kernel_bias_));
}

TokenGrid VitBackbone::assemble_tokens(const Tensor& patch_tokens) const {
  const int h = cfg_.grid();
  if (patch_tokens.rank() != 2 || patch_tokens.dim(0) != h * h ||
      patch_tokens.dim(1) != cfg_.d_model) {
    throw std::invalid_argument("backbone: patch tokens must be [h^2, d_model], got " +
                                shape_str(patch_tokens.shape()));
  }
  std::vector<Tensor> parts = {cls_, patch_tokens};
  TokenGrid grid;
  grid.tokens = add(concat_rows(parts), pos_);
  grid.h = h;
  return grid;
}

MhsaResult VitBackbone::multi_head_attention(const Tensor& x, int block,
                                             const LowRankAdapter* lowrank) const {
  if (block < 0 || block >= cfg_.n_blocks) {
    throw std::out_of_range("backbone: block index " + std::to_string(block) + " out of range");
  }
  const Block& b = blocks_[static_cast<std::size_t>(block)];
  const int d = cfg_.d_model;
  const int dh = d / cfg_.n_heads;

  Tensor q = add_bias(matmul(x, b.wq), b.bq);
  Tensor k = add_bias(matmul(x, b.wk), b.bk);
  Tensor v = add_bias(matmul(x, b.wv), b.bv);
  if (lowrank) {
    q = add(q, lowrank->delta_q(x));
    v = add(v, lowrank->delta_v(x));
  }

  MhsaResult result;
  std::vector<Tensor> head_outs;
  head_outs.reserve(static_cast<std::size_t>(cfg_.n_heads));
  result.probs.reserve(static_cast<std::size_t>(cfg_.n_heads));
  for (int hh = 0; hh < cfg_.n_heads; ++hh) {
    Tensor qh = slice_cols(q, hh * dh, (hh + 1) * dh);
    Tensor kh = slice_cols(k, hh * dh, (hh + 1) * dh);
    Tensor vh = slice_cols(v, hh * dh, (hh + 1) * dh);
    Tensor scores = scalar_mul(matmul(qh, transpose(kh)), 1.0 / std::sqrt(static_cast<double>(dh)));
    Tensor probs = softmax(scores, 1);
    result.probs.push_back(probs);
    head_outs.push_back(matmul(probs, vh));
  }
  result.out = add_bias(matmul(concat_cols(head_outs), b.wo), b.bo);
  result.V = v;
  return result;
}

Tensor VitBackbone::forward(const TokenGrid& grid, const AdapterSet& adapters,
                            bool normalize) const {
  const std::size_t L = static_cast<std::size_t>(cfg_.n_blocks);
  if (!adapters.bottleneck.empty() && adapters.bottleneck.size() != L) {
    throw std::out_of_range("backbone: bottleneck adapters must cover every block");
  }
  if (!adapters.lowrank.empty() && adapters.lowrank.size() != L) {
    throw std::out_of_range("backbone: low-rank adapters must cover every block");
  }
  if (adapters.attention &&
      (adapters.attention->block_index < 0 || adapters.attention->block_index >= cfg_.n_blocks)) {
    throw std::out_of_range("backbone: attention bank block index out of range");
  }
  if (adapters.attention && adapters.attention->grid_h != grid.h) {
    throw std::invalid_argument("backbone: attention bank grid does not match token grid");
  }

  Tensor x = grid.tokens;
  const int n = cfg_.token_count();
  for (int l = 0; l < cfg_.n_blocks; ++l) {
    const Block& b = blocks_[static_cast<std::size_t>(l)];
    const LowRankAdapter* lr =
        adapters.lowrank.empty() ? nullptr : &adapters.lowrank[static_cast<std::size_t>(l)];

    Tensor h1 = layer_norm(x, b.ln1_g, b.ln1_b);
    MhsaResult attn = multi_head_attention(h1, l, lr);
    x = add(x, attn.out);  // f_bar of this block

    if (adapters.attention && adapters.attention->block_index == l) {
      Tensor v_spatial = slice_rows(attn.V, 1, n);
      x = apply_domain_attention(*adapters.attention, v_spatial, x, b.wo, b.bo);
    }

    Tensor h2 = layer_norm(x, b.ln2_g, b.ln2_b);
    Tensor mlp_out = add_bias(
        matmul(gelu(add_bias(matmul(h2, b.fc1_w), b.fc1_b)), b.fc2_w), b.fc2_b);
    Tensor base = adapters.bottleneck.empty()
                      ? x
                      : adapters.bottleneck[static_cast<std::size_t>(l)].adapt(x);
    x = add(base, mlp_out);
  }
  x = layer_norm(x, lnf_g_, lnf_b_);
  Tensor embedding = reshape(slice_rows(x, 0, 1), {cfg_.d_model});
  return normalize ? l2_normalize_rows(embedding) : embedding;
}

const Tensor& VitBackbone::attn_out_weight(int block) const {
  if (block < 0 || block >= cfg_.n_blocks) throw std::out_of_range("backbone: block out of range");
  return blocks_[static_cast<std::size_t>(block)].wo;
}

const Tensor& VitBackbone::attn_out_bias(int block) const {
  if (block < 0 || block >= cfg_.n_blocks) throw std::out_of_range("backbone: block out of range");
  return blocks_[static_cast<std::size_t>(block)].bo;
}

}  // namespace lrva
