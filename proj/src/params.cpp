#include "lrva/params.hpp"

#include <stdexcept>

namespace lrva {

Tensor& ParameterStore::add(const std::string& name, Tensor tensor, bool frozen) {
  if (name.empty()) throw std::invalid_argument("params: empty parameter name");
  if (index_.count(name)) throw std::invalid_argument("params: duplicate parameter '" + name + "'");
  if (!tensor.defined()) throw std::invalid_argument("params: undefined tensor for '" + name + "'");
  tensor.set_requires_grad(!frozen);
  index_[name] = entries_.size();
  entries_.push_back(ParamEntry{name, std::move(tensor), frozen});
  return entries_.back().tensor;
}

Tensor& ParameterStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("params: unknown parameter '" + name + "'");
  return entries_[it->second].tensor;
}

const Tensor& ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("params: unknown parameter '" + name + "'");
  return entries_[it->second].tensor;
}

bool ParameterStore::is_frozen(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("params: unknown parameter '" + name + "'");
  return entries_[it->second].frozen;
}

std::vector<ParamEntry> ParameterStore::trainable() const {
  std::vector<ParamEntry> out;
  for (const auto& e : entries_) {
    if (!e.frozen) out.push_back(e);
  }
  return out;
}

std::int64_t ParameterStore::trainable_count() const {
  std::int64_t n = 0;
  for (const auto& e : entries_) {
    if (!e.frozen) n += e.tensor.numel();
  }
  return n;
}

std::int64_t ParameterStore::frozen_count() const {
  std::int64_t n = 0;
  for (const auto& e : entries_) {
    if (e.frozen) n += e.tensor.numel();
  }
  return n;
}

std::int64_t ParameterStore::trainable_count_with_prefix(const std::string& prefix) const {
  std::int64_t n = 0;
  for (const auto& e : entries_) {
    if (!e.frozen && e.name.rfind(prefix, 0) == 0) n += e.tensor.numel();
  }
  return n;
}

void ParameterStore::zero_grads() {
  for (auto& e : entries_) {
    if (!e.frozen) e.tensor.zero_grad();
  }
}

std::vector<double> ParameterStore::frozen_values() const {
  std::vector<double> out;
  for (const auto& e : entries_) {
    if (e.frozen) out.insert(out.end(), e.tensor.vec().begin(), e.tensor.vec().end());
  }
  return out;
}

}  // namespace lrva
