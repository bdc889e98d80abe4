#include "ssr/nn/params.hpp"

#include "ssr/error.hpp"

#include <cmath>

namespace ssr::nn {

std::size_t ParamStore::add(std::string name, Matrix value, bool trainable) {
  require(!lookup_.contains(name), ErrorKind::Parameter, "duplicate tensor name '" + name + "'");
  lookup_.emplace(name, entries_.size());
  entries_.push_back({std::move(name), std::move(value), trainable});
  return entries_.size() - 1;
}

bool ParamStore::contains(std::string_view name) const {
  return lookup_.contains(std::string(name));
}

std::size_t ParamStore::index(std::string_view name) const {
  auto it = lookup_.find(std::string(name));
  if (it == lookup_.end()) fail(ErrorKind::Lookup, "no tensor named '" + std::string(name) + "'");
  return it->second;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += static_cast<std::size_t>(e.value.size());
  return n;
}

bool operator==(const ParamStore& a, const ParamStore& b) {
  if (a.entries_.size() != b.entries_.size()) return false;
  for (std::size_t i = 0; i < a.entries_.size(); ++i) {
    const auto& x = a.entries_[i];
    const auto& y = b.entries_[i];
    if (x.name != y.name || x.trainable != y.trainable || x.value.rows() != y.value.rows() ||
        x.value.cols() != y.value.cols() || x.value != y.value) {
      return false;
    }
  }
  return true;
}

Gradients zero_gradients(const ParamStore& store) {
  Gradients g(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    g[i] = Matrix::Zero(store.value(i).rows(), store.value(i).cols());
  }
  return g;
}

void accumulate(Gradients& into, const Gradients& from, double scale) {
  require(into.size() == from.size(), ErrorKind::Parameter, "gradient sets differ in size");
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += scale * from[i];
}

double global_norm(const Gradients& grads) {
  double s = 0.0;
  for (const auto& g : grads) s += g.squaredNorm();
  return std::sqrt(s);
}

}  // namespace ssr::nn
