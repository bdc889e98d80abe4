#pragma once

#include "ssr/nn/tape.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>
#include <string>

namespace ssr::test {

using LossBuilder = std::function<nn::Var(nn::Tape&)>;

inline double loss_value(const nn::ParamStore& store, const LossBuilder& build, bool training,
                         std::uint64_t seed) {
  nn::Tape t(store, training, seed);
  return t.value(build(t))(0, 0);
}

// Compares tape gradients with central differences for every element of every
// trainable tensor in `store`. Returns the number of elements checked.
inline std::size_t check_gradients(nn::ParamStore store, const LossBuilder& build, bool training = false,
                                   std::uint64_t seed = 7, double step = 1e-4, double rel_tol = 1e-3,
                                   double abs_tol = 1e-7) {
  nn::Gradients analytic;
  {
    nn::Tape t(store, training, seed);
    analytic = t.backward(build(t));
  }
  std::size_t checked = 0;
  for (std::size_t p = 0; p < store.size(); ++p) {
    if (!store.trainable(p)) continue;
    Matrix& value = store.value(p);
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      const double saved = value.data()[i];
      value.data()[i] = saved + step;
      const double up = loss_value(store, build, training, seed);
      value.data()[i] = saved - step;
      const double down = loss_value(store, build, training, seed);
      value.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[p].data()[i];
      EXPECT_LE(std::abs(a - numeric), rel_tol * std::max(std::abs(a), std::abs(numeric)) + abs_tol)
          << store.name(p) << "[" << i << "] analytic " << a << " numeric " << numeric;
      ++checked;
    }
  }
  return checked;
}

inline Matrix random_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

// Replaces every tensor with random values so zero-initialized tables and unit
// norm gains do not hide gradient errors.
inline void randomize(nn::ParamStore& store, std::uint64_t seed, double sd = 0.5) {
  std::mt19937_64 rng(seed);
  for (std::size_t p = 0; p < store.size(); ++p) {
    if (!store.trainable(p)) continue;
    Matrix& v = store.value(p);
    v = random_normal(v.rows(), v.cols(), rng, sd);
  }
}

}  // namespace ssr::test
