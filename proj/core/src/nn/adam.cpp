#include "ssr/nn/adam.hpp"

#include "ssr/error.hpp"

#include <cmath>

namespace ssr::nn {

AdamState make_adam(const ParamStore& params, double lr) {
  AdamState s;
  s.lr = lr;
  s.m = zero_gradients(params);
  s.v = zero_gradients(params);
  return s;
}

void adam_step(ParamStore& params, const Gradients& grads, AdamState& state) {
  require(grads.size() == params.size(), ErrorKind::Parameter, "gradient count does not match parameters");
  if (state.m.empty()) {
    state.m = zero_gradients(params);
    state.v = zero_gradients(params);
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    require(grads[i].rows() == params.value(i).rows() && grads[i].cols() == params.value(i).cols(),
            ErrorKind::Parameter, "gradient shape mismatch for '" + params.name(i) + "'");
    if (!grads[i].allFinite()) {
      fail(ErrorKind::TrainingDivergence, "non-finite gradient for '" + params.name(i) + "'");
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!params.trainable(i)) continue;
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i].cwiseProduct(grads[i]);
    params.value(i).array() -= state.lr * (state.m[i].array() / c1) /
                               ((state.v[i].array() / c2).sqrt() + state.eps);
  }
}

}  // namespace ssr::nn
