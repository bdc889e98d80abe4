#pragma once

#include "ssr/types.hpp"

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ssr::nn {

// Named tensors in insertion order. Non-trainable entries (normalization
// statistics) travel with the checkpoint but are skipped by the optimizer.
class ParamStore {
 public:
  std::size_t add(std::string name, Matrix value, bool trainable = true);

  std::size_t size() const noexcept { return entries_.size(); }
  bool contains(std::string_view name) const;
  std::size_t index(std::string_view name) const;

  const std::string& name(std::size_t i) const { return entries_.at(i).name; }
  bool trainable(std::size_t i) const { return entries_.at(i).trainable; }
  const Matrix& value(std::size_t i) const { return entries_.at(i).value; }
  Matrix& value(std::size_t i) { return entries_.at(i).value; }
  const Matrix& value(std::string_view name) const { return value(index(name)); }
  Matrix& value(std::string_view name) { return value(index(name)); }

  std::size_t scalar_count() const;

  friend bool operator==(const ParamStore& a, const ParamStore& b);

 private:
  struct Entry {
    std::string name;
    Matrix value;
    bool trainable = true;
  };
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> lookup_;
};

// One gradient matrix per ParamStore entry, same shapes; unused entries are zero.
using Gradients = std::vector<Matrix>;

Gradients zero_gradients(const ParamStore& store);
void accumulate(Gradients& into, const Gradients& from, double scale = 1.0);
double global_norm(const Gradients& grads);

}  // namespace ssr::nn
