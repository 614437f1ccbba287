#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "lrva/rng.hpp"

namespace lrva {

using Shape = std::vector<int>;

std::int64_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

// Flat double storage plus (lazily allocated) gradient buffer. Every op
// produces a fresh impl, so each node on the tape is the unique producer of
// its output buffer.
struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;     // empty until a backward pass touches it
  bool requires_grad = false;   // leaf wants gradients
  bool on_tape = false;         // produced while a tape was active
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor from_data(Shape shape, std::vector<double> data);
  static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0, double mean = 0.0);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }
  int dim(int i) const { return impl_->shape[static_cast<std::size_t>(i)]; }
  std::int64_t numel() const { return static_cast<std::int64_t>(impl_->data.size()); }

  double* data() { return impl_->data.data(); }
  const double* data() const { return impl_->data.data(); }
  std::vector<double>& vec() { return impl_->data; }
  const std::vector<double>& vec() const { return impl_->data; }

  double item() const;                          // requires numel() == 1
  double at(std::initializer_list<int> idx) const;

  Tensor& set_requires_grad(bool v = true);
  bool requires_grad() const { return impl_->requires_grad; }
  bool has_grad() const { return impl_ && !impl_->grad.empty(); }
  const std::vector<double>& grad() const;      // throws if no gradient present
  void zero_grad();

  // Value copy with no grad flags; used when parking features in the memory
  // bank or materializing read-only views.
  Tensor detach_copy() const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;
};

// Ensures a zero-filled grad buffer exists.
std::vector<double>& ensure_grad(TensorImpl& impl);

// True when gradients must flow into this tensor (leaf param or tape output).
inline bool grad_tracked(const Tensor& t) {
  return t.impl()->requires_grad || t.impl()->on_tape;
}

// When enabled, every op validates its output for NaN/Inf and throws
// naming the op that produced the bad value.
void set_debug_checks(bool enabled);
bool debug_checks_enabled();
void check_finite(const Tensor& t, const char* op);

// Explicit Wengert list. Constructing a Tape makes it current; ops append
// nodes in execution order and backward() replays them in reverse exactly
// once, accumulating into .grad buffers.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  struct Node {
    const char* op;
    std::shared_ptr<TensorImpl> out;
    std::function<void()> backward;
  };

  static Tape* current();
  void record(const char* op, std::shared_ptr<TensorImpl> out, std::function<void()> backward);
  void backward(const Tensor& loss);
  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
  Tape* previous_ = nullptr;
  bool backward_done_ = false;
};

// Convenience wrapper over the active tape.
void backward(const Tensor& loss);

namespace faults {
// Scales the upstream gradient of every node recorded by `op_name` before its
// backward rule runs. Used to prove the checker catches a broken rule and
// names the op. Empty name clears the fault.
void inject_backward_fault(const std::string& op_name, double scale);
const std::string& injected_fault_op();
double injected_fault_scale();
}  // namespace faults

}  // namespace lrva
