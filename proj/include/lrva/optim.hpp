#pragma once

#include <vector>

#include "lrva/tensor.hpp"

namespace lrva {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam over an explicit parameter list. Moment buffers are plain tensors so
// training state can reuse the checkpoint container.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig cfg = {});

  // Applies one update from the gradients currently held by the parameters.
  // Parameters without a populated gradient are treated as gradient zero.
  void step();
  void zero_grads();

  std::int64_t steps_taken() const { return t_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }
  // Restores serialized state; moment shapes must match the parameter list.
  void restore(std::int64_t t, const std::vector<Tensor>& m, const std::vector<Tensor>& v);

 private:
  std::vector<Tensor> params_;
  std::vector<Tensor> m_, v_;
  AdamConfig cfg_;
  std::int64_t t_ = 0;
};

}  // namespace lrva
