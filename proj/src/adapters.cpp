#include "lrva/adapters.hpp"

#include <cmath>
#include <stdexcept>

#include "lrva/ops.hpp"
#include "lrva/optim.hpp"
#include "lrva/rng.hpp"

namespace lrva {
namespace {

// Fan-balanced normal init for trainable projections.
Tensor glorot(Shape shape, int fan_in, int fan_out, std::uint64_t seed) {
  Rng rng(seed);
  return Tensor::randn(std::move(shape), rng, std::sqrt(2.0 / (fan_in + fan_out)));
}

}  // namespace

BottleneckAdapter BottleneckAdapter::create(ParameterStore& store, const std::string& prefix,
                                            int d_model, int d_bottleneck,
                                            std::uint64_t init_seed) {
  if (d_bottleneck < 1) throw std::invalid_argument("adapter: bottleneck width must be >= 1");
  BottleneckAdapter a;
  a.down = store.add(prefix + ".down",
                     glorot({d_model, d_bottleneck}, d_model, d_bottleneck,
                            derive_seed(init_seed, prefix + ".down")),
                     /*frozen=*/false);
  a.up = store.add(prefix + ".up", Tensor::zeros({d_bottleneck, d_model}), /*frozen=*/false);
  a.scale = store.add(prefix + ".scale", Tensor::scalar(1.0), /*frozen=*/false);
  return a;
}

Tensor BottleneckAdapter::adapt(const Tensor& x) const {
  return add(x, mul_scalar_tensor(matmul(gelu(matmul(x, down)), up), scale));
}

std::int64_t BottleneckAdapter::trainable_count() const {
  return down.numel() + up.numel() + scale.numel();
}

LowRankAdapter LowRankAdapter::create(ParameterStore& store, const std::string& prefix,
                                      int d_model, int rank, std::uint64_t init_seed) {
  if (rank < 1) throw std::invalid_argument("adapter: rank must be >= 1");
  LowRankAdapter a;
  a.a_q = store.add(prefix + ".a_q",
                    glorot({d_model, rank}, d_model, rank, derive_seed(init_seed, prefix + ".a_q")),
                    false);
  a.b_q = store.add(prefix + ".b_q", Tensor::zeros({rank, d_model}), false);
  a.a_v = store.add(prefix + ".a_v",
                    glorot({d_model, rank}, d_model, rank, derive_seed(init_seed, prefix + ".a_v")),
                    false);
  a.b_v = store.add(prefix + ".b_v", Tensor::zeros({rank, d_model}), false);
  return a;
}

Tensor LowRankAdapter::delta_q(const Tensor& x) const { return matmul(matmul(x, a_q), b_q); }
Tensor LowRankAdapter::delta_v(const Tensor& x) const { return matmul(matmul(x, a_v), b_v); }

std::int64_t LowRankAdapter::trainable_count() const {
  return a_q.numel() + b_q.numel() + a_v.numel() + b_v.numel();
}

LinearHead LinearHead::create(ParameterStore& store, const std::string& prefix, int d_model,
                              int n_classes, std::uint64_t init_seed) {
  if (n_classes < 2) throw std::invalid_argument("head: need at least two classes");
  LinearHead h;
  h.weight = store.add(prefix + ".weight",
                       glorot({d_model, n_classes}, d_model, n_classes,
                              derive_seed(init_seed, prefix + ".weight")),
                       false);
  h.bias = store.add(prefix + ".bias", Tensor::zeros({n_classes}), false);
  return h;
}

Tensor LinearHead::logits(const Tensor& features) const {
  Tensor f = features;
  if (f.rank() == 1) f = reshape(f, {1, static_cast<int>(f.numel())});
  return add_bias(matmul(f, weight), bias);
}

std::int64_t LinearHead::trainable_count() const { return weight.numel() + bias.numel(); }

LinearHead linear_probe(const Tensor& features, const std::vector<int>& labels, int n_classes,
                        const ProbeOptions& opts) {
  if (features.rank() != 2) throw std::invalid_argument("probe: features must be [n, d]");
  const int n = features.dim(0), d = features.dim(1);
  if (static_cast<int>(labels.size()) != n) throw std::invalid_argument("probe: label count mismatch");
  for (int y : labels) {
    if (y < 0 || y >= n_classes) {
      throw std::invalid_argument("probe: label " + std::to_string(y) + " out of range");
    }
  }
  ParameterStore store;
  LinearHead head = LinearHead::create(store, "probe", d, n_classes, opts.seed);
  Adam adam({head.weight, head.bias}, AdamConfig{opts.lr});
  for (int step = 0; step < opts.steps; ++step) {
    adam.zero_grads();
    Tape tape;
    Tensor loss = cross_entropy(head.logits(features), labels);
    tape.backward(loss);
    adam.step();
  }
  return head;
}

}  // namespace lrva
