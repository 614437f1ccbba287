#include "lrva/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace lrva {

std::int64_t numel_of(const Shape& shape) {
  std::int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor: non-positive extent in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

static std::shared_ptr<TensorImpl> make_impl(Shape shape) {
  auto impl = std::make_shared<TensorImpl>();
  const std::int64_t n = numel_of(shape);
  impl->shape = std::move(shape);
  impl->data.assign(static_cast<std::size_t>(n), 0.0);
  return impl;
}

Tensor Tensor::zeros(Shape shape) { return Tensor(make_impl(std::move(shape))); }

Tensor Tensor::full(Shape shape, double value) {
  Tensor t(make_impl(std::move(shape)));
  for (double& x : t.vec()) x = value;
  return t;
}

Tensor Tensor::scalar(double value) { return full({1}, value); }

Tensor Tensor::from_data(Shape shape, std::vector<double> data) {
  const std::int64_t n = numel_of(shape);
  if (n != static_cast<std::int64_t>(data.size())) {
    throw std::invalid_argument("tensor: data size " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  return Tensor(std::move(impl));
}

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev, double mean) {
  Tensor t(make_impl(std::move(shape)));
  for (double& x : t.vec()) x = rng.normal(mean, stddev);
  return t;
}

double Tensor::item() const {
  if (numel() != 1) throw std::logic_error("tensor: item() on non-scalar " + shape_str(shape()));
  return impl_->data[0];
}

double Tensor::at(std::initializer_list<int> idx) const {
  if (static_cast<int>(idx.size()) != rank()) {
    throw std::logic_error("tensor: at() index rank mismatch for " + shape_str(shape()));
  }
  std::int64_t flat = 0;
  int axis = 0;
  for (int i : idx) {
    const int extent = impl_->shape[static_cast<std::size_t>(axis)];
    if (i < 0 || i >= extent) throw std::out_of_range("tensor: at() index out of range");
    flat = flat * extent + i;
    ++axis;
  }
  return impl_->data[static_cast<std::size_t>(flat)];
}

Tensor& Tensor::set_requires_grad(bool v) {
  impl_->requires_grad = v;
  return *this;
}

const std::vector<double>& Tensor::grad() const {
  if (!has_grad()) throw std::logic_error("tensor: gradient not populated");
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_ && !impl_->grad.empty()) impl_->grad.assign(impl_->grad.size(), 0.0);
}

Tensor Tensor::detach_copy() const {
  return Tensor::from_data(impl_->shape, impl_->data);
}

std::vector<double>& ensure_grad(TensorImpl& impl) {
  if (impl.grad.empty()) impl.grad.assign(impl.data.size(), 0.0);
  return impl.grad;
}

// ---------------------------------------------------------------------------
// Debug checks

static bool g_debug_checks = false;

void set_debug_checks(bool enabled) { g_debug_checks = enabled; }
bool debug_checks_enabled() { return g_debug_checks; }

void check_finite(const Tensor& t, const char* op) {
  if (!g_debug_checks) return;
  for (double x : t.vec()) {
    if (!std::isfinite(x)) {
      throw std::runtime_error(std::string("non-finite value produced by op '") + op + "'");
    }
  }
}

// ---------------------------------------------------------------------------
// Tape

static thread_local Tape* g_current_tape = nullptr;

Tape::Tape() : previous_(g_current_tape) { g_current_tape = this; }

Tape::~Tape() { g_current_tape = previous_; }

Tape* Tape::current() { return g_current_tape; }

void Tape::record(const char* op, std::shared_ptr<TensorImpl> out, std::function<void()> backward) {
  out->on_tape = true;
  nodes_.push_back(Node{op, std::move(out), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (backward_done_) throw std::logic_error("tape: backward() already ran; nodes replay exactly once");
  if (loss.numel() != 1) throw std::logic_error("tape: backward() requires a scalar loss");
  if (!loss.impl()->on_tape) throw std::logic_error("tape: loss was not produced under this tape");
  backward_done_ = true;

  ensure_grad(*loss.impl())[0] += 1.0;
  const std::string& fault_op = faults::injected_fault_op();
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->out->grad.empty()) continue;  // no gradient reached this value
    if (!fault_op.empty() && fault_op == it->op) {
      const double s = faults::injected_fault_scale();
      for (double& g : it->out->grad) g *= s;
    }
    it->backward();
  }
}

void backward(const Tensor& loss) {
  Tape* tape = Tape::current();
  if (!tape) throw std::logic_error("backward: no active tape");
  tape->backward(loss);
}

namespace faults {

static std::string g_fault_op;
static double g_fault_scale = 1.0;

void inject_backward_fault(const std::string& op_name, double scale) {
  g_fault_op = op_name;
  g_fault_scale = scale;
}
const std::string& injected_fault_op() { return g_fault_op; }
double injected_fault_scale() { return g_fault_scale; }

}  // namespace faults

}  // namespace lrva
