#include "lrva/domattn.hpp"

#include <stdexcept>

#include "lrva/ops.hpp"
#include "lrva/rng.hpp"

namespace lrva {

AttentionMapBank AttentionMapBank::create(ParameterStore& store, int map_count, int grid_h,
                                          int block_index, std::uint64_t init_seed) {
  if (map_count < 1) throw std::invalid_argument("domattn: map count must be >= 1");
  if (grid_h < 1) throw std::invalid_argument("domattn: grid must be >= 1");
  AttentionMapBank bank;
  Rng rng(derive_seed(init_seed, "domattn.maps"));
  bank.maps = store.add("domattn.maps",
                        Tensor::randn({map_count, 2 * grid_h, 2 * grid_h}, rng, 0.02),
                        /*frozen=*/false);
  bank.weights = store.add("domattn.r", Tensor::zeros({map_count}), /*frozen=*/false);
  bank.alpha = store.add("domattn.alpha", Tensor::zeros({1}), /*frozen=*/false);
  bank.block_index = block_index;
  bank.grid_h = grid_h;
  return bank;
}

std::int64_t AttentionMapBank::trainable_count() const {
  return maps.numel() + weights.numel() + alpha.numel();
}

Tensor crop_map(const Tensor& global_map, int i, int j, int h) {
  if (global_map.rank() != 2 || global_map.dim(0) != 2 * h || global_map.dim(1) != 2 * h) {
    throw std::invalid_argument("domattn: global map must be [2h, 2h]");
  }
  if (i < 0 || i >= h || j < 0 || j >= h) {
    throw std::invalid_argument("domattn: token index out of range");
  }
  const int top = h - i, left = h - j;
  std::vector<double> out(static_cast<std::size_t>(h) * h);
  for (int a = 0; a < h; ++a) {
    for (int b = 0; b < h; ++b) {
      out[static_cast<std::size_t>(a) * h + b] = global_map.at({top + a, left + b});
    }
  }
  return Tensor::from_data({h, h}, std::move(out));
}

std::vector<Tensor> build_token_attention(const AttentionMapBank& bank) {
  const int C = bank.map_count();
  const int h = bank.grid_h;
  const int side = 2 * h;
  Tensor flat = reshape(bank.maps, {C, side * side});
  std::vector<Tensor> out;
  out.reserve(static_cast<std::size_t>(C));
  for (int c = 0; c < C; ++c) {
    Tensor map_c = reshape(slice_rows(flat, c, c + 1), {side, side});
    out.push_back(softmax(global_to_token_attention(map_c, h), 1));
  }
  return out;
}

Tensor apply_domain_attention(const AttentionMapBank& bank, const Tensor& V_spatial,
                              const Tensor& f_bar, const Tensor& out_w, const Tensor& out_b) {
  const int h = bank.grid_h;
  const int n = h * h;
  if (V_spatial.rank() != 2 || V_spatial.dim(0) != n) {
    throw std::invalid_argument("domattn: V must have h^2 rows (class token excluded), got " +
                                shape_str(V_spatial.shape()));
  }
  if (f_bar.rank() != 2 || f_bar.dim(0) != n + 1) {
    throw std::invalid_argument("domattn: block output must have h^2+1 rows");
  }

  const std::vector<Tensor> attention = build_token_attention(bank);
  std::vector<Tensor> per_map;
  per_map.reserve(attention.size());
  for (const Tensor& A : attention) {
    // MLP of the host block = its frozen attention output projection.
    per_map.push_back(add_bias(matmul(matmul(A, V_spatial), out_w), out_b));
  }
  Tensor mixed = weighted_sum(per_map, softmax(bank.weights, 0));

  Tensor cls = slice_rows(f_bar, 0, 1);
  Tensor spatial = slice_rows(f_bar, 1, n + 1);
  Tensor updated = add(spatial, mul_scalar_tensor(mixed, bank.alpha));
  std::vector<Tensor> parts = {cls, updated};
  return concat_rows(parts);
}

}  // namespace lrva
