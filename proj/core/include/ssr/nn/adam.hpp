#pragma once

#include "ssr/nn/params.hpp"

#include <cstddef>

namespace ssr::nn {

struct AdamState {
  std::size_t step = 0;
  Gradients m;
  Gradients v;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamState make_adam(const ParamStore& params, double lr = 1e-3);

/// Bias-corrected Adam update of every trainable tensor. A non-finite
/// gradient raises Error(TrainingDivergence) before anything is modified.
void adam_step(ParamStore& params, const Gradients& grads, AdamState& state);

}  // namespace ssr::nn
