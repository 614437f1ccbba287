#include "lrva/subkernel.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include "lrva/ops.hpp"

namespace lrva {

Tensor SubKernelBank::sub_kernel(int t) const {
  if (t < 0 || t >= count()) throw std::out_of_range("subkernel: index out of range");
  const auto [kr, kc] = offsets[static_cast<std::size_t>(t)];
  const int d = kernel.dim(0), c = kernel.dim(1), q = kernel.dim(2);
  std::vector<double> out(static_cast<std::size_t>(d) * c * u * u);
  std::size_t at = 0;
  for (int o = 0; o < d; ++o) {
    for (int ch = 0; ch < c; ++ch) {
      for (int i = 0; i < u; ++i) {
        for (int j = 0; j < u; ++j) out[at++] = kernel.at({o, ch, kr + i, kc + j});
      }
    }
  }
  (void)q;
  return Tensor::from_data({d, c, u, u}, std::move(out));
}

SubKernelBank carve(const Tensor& kernel, int u, int v, bool stride1) {
  if (kernel.rank() != 4 || kernel.dim(2) != kernel.dim(3)) {
    throw std::invalid_argument("subkernel: kernel must be [d_model, channels, q, q]");
  }
  const int q = kernel.dim(2);
  if (u < 1 || u > q) throw std::invalid_argument("subkernel: u must be in [1, q]");
  if (v < 1) throw std::invalid_argument("subkernel: v must be >= 1");

  std::vector<int> axis;
  if (stride1) {
    for (int o = 0; o <= q - u; ++o) axis.push_back(o);
  } else if (v == 1) {
    axis.push_back(0);
  } else {
    for (int i = 0; i < v; ++i) {
      axis.push_back(static_cast<int>(
          std::lround(static_cast<double>(i) * (q - u) / static_cast<double>(v - 1))));
    }
  }

  SubKernelBank bank;
  bank.kernel = kernel;
  bank.u = u;
  std::set<std::pair<int, int>> seen;
  for (int r : axis) {
    for (int c : axis) {
      if (!seen.insert({r, c}).second) {
        throw std::invalid_argument("subkernel: duplicate offsets (v=" + std::to_string(v) +
                                    " too large for q-u=" + std::to_string(q - u) + ")");
      }
      bank.offsets.emplace_back(r, c);
    }
  }
  bank.w = Tensor::zeros({bank.count()});
  return bank;
}

std::vector<Tensor> encode(const Tensor& image, const SubKernelBank& bank, int stride) {
  if (stride != bank.u) {
    throw std::invalid_argument(
        "subkernel: encode stride must equal sub-kernel side u (each sub-kernel tiles the image)");
  }
  if (image.rank() != 3) throw std::invalid_argument("subkernel: image must be [3, H, W]");
  const int H = image.dim(1), W = image.dim(2);
  if (H % bank.u != 0 || W % bank.u != 0) {
    throw std::invalid_argument("subkernel: image size " + std::to_string(H) +
                                " not divisible by u=" + std::to_string(bank.u));
  }
  std::vector<Tensor> maps;
  maps.reserve(static_cast<std::size_t>(bank.count()));
  for (const auto& [kr, kc] : bank.offsets) {
    maps.push_back(conv2d_window(image, bank.kernel, kr, kc, bank.u, stride));
  }
  return maps;
}

Tensor combine(std::span<const Tensor> maps, const Tensor& w) {
  return weighted_sum(maps, softmax(w, 0));
}

TokenGrid tokenize_finegrained(const Tensor& image, const SubKernelBank& bank,
                               const VitBackbone& backbone, bool pool) {
  const std::vector<Tensor> maps = encode(image, bank, bank.u);
  Tensor combined = combine(maps, bank.w);  // [d, p, p]
  Tensor gridded = pool ? max_pool2d(combined, 2, 2) : combined;
  const int h = backbone.config().grid();
  if (gridded.dim(1) != h || gridded.dim(2) != h) {
    throw std::invalid_argument(
        "subkernel: pooled grid " + std::to_string(gridded.dim(1)) + " does not match backbone grid " +
        std::to_string(h) + " (configuration error: need image_size/u" + (pool ? "/2" : "") +
        " == image_size/patch)");
  }
  Tensor tokens = add_bias(tokens_from_feature_map(gridded), backbone.patch_bias());
  return backbone.assemble_tokens(tokens);
}

}  // namespace lrva
