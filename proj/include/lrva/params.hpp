#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "lrva/tensor.hpp"

namespace lrva {

struct ParamEntry {
  std::string name;
  Tensor tensor;
  bool frozen = false;
};

// Ordered registry of named parameters split into a frozen backbone set and a
// trainable adapter set. Registration order is preserved so serialization and
// optimizer traversal are deterministic.
class ParameterStore {
 public:
  // Registers a parameter; requires_grad is derived from the frozen flag.
  // Duplicate names are an error.
  Tensor& add(const std::string& name, Tensor tensor, bool frozen);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool is_frozen(const std::string& name) const;

  const std::vector<ParamEntry>& entries() const { return entries_; }
  std::vector<ParamEntry> trainable() const;

  // Total scalar counts.
  std::int64_t trainable_count() const;
  std::int64_t frozen_count() const;
  // Trainable scalars whose name starts with `prefix` (per-module accounting).
  std::int64_t trainable_count_with_prefix(const std::string& prefix) const;

  void zero_grads();

  // Concatenated frozen values in registration order; used by the freeze
  // contract to assert bit-identical backbone parameters across training.
  std::vector<double> frozen_values() const;

 private:
  std::vector<ParamEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace lrva
