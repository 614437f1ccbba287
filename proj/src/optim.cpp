#include "lrva/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace lrva {

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Tensor& p : params_) {
    if (!p.defined()) throw std::invalid_argument("adam: undefined parameter");
    m_.push_back(Tensor::zeros(p.shape()));
    v_.push_back(Tensor::zeros(p.shape()));
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    double* pd = p.data();
    double* md = m_[i].data();
    double* vd = v_[i].data();
    const bool has_grad = p.has_grad();
    const std::vector<double>* g = has_grad ? &p.grad() : nullptr;
    for (std::int64_t j = 0; j < p.numel(); ++j) {
      const double gj = has_grad ? (*g)[static_cast<std::size_t>(j)] : 0.0;
      md[j] = cfg_.beta1 * md[j] + (1.0 - cfg_.beta1) * gj;
      vd[j] = cfg_.beta2 * vd[j] + (1.0 - cfg_.beta2) * gj * gj;
      const double mhat = md[j] / bc1;
      const double vhat = vd[j] / bc2;
      pd[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void Adam::zero_grads() {
  for (Tensor& p : params_) p.zero_grad();
}

void Adam::restore(std::int64_t t, const std::vector<Tensor>& m, const std::vector<Tensor>& v) {
  if (m.size() != params_.size() || v.size() != params_.size()) {
    throw std::invalid_argument("adam: moment count mismatch on restore");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (m[i].shape() != params_[i].shape() || v[i].shape() != params_[i].shape()) {
      throw std::invalid_argument("adam: moment shape mismatch on restore");
    }
    m_[i] = m[i].detach_copy();
    v_[i] = v[i].detach_copy();
  }
  t_ = t;
}

}  // namespace lrva
