#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "microsr/rng.hpp"
#include "microsr/tensor.hpp"

namespace microsr {

// MSRA (He) initialization for a conv kernel (OIHW) or dense weight (FxG),
// adjusted for a leaky activation and scaled down by `scale`. Samples are
// drawn in double precision so the stream is identical across scalar types.
template <typename T>
TensorPtr<T> msra_init(const Shape& shape, double leak, double scale, std::uint64_t seed,
                       bool requires_grad = true) {
  if (shape.empty()) throw ShapeError("msra_init: empty shape");
  if (!(scale > 0.0 && scale <= 1.0)) {
    throw NumericError("msra_init: scale must be in (0,1], got " + std::to_string(scale));
  }
  std::int64_t fan_in = 0;
  if (shape.size() == 4) {
    fan_in = shape[1] * shape[2] * shape[3];  // I * KH * KW
  } else if (shape.size() == 2) {
    fan_in = shape[0];  // F
  } else {
    throw ShapeError("msra_init: expected conv OIHW or dense FxG shape, got " + shape_str(shape));
  }
  const double stddev = std::sqrt(2.0 / ((1.0 + leak * leak) * static_cast<double>(fan_in)));
  auto eng = make_engine(seed);
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<T> data(static_cast<std::size_t>(numel(shape)));
  for (auto& v : data) v = static_cast<T>(scale * dist(eng));
  return make_tensor<T>(shape, std::move(data), requires_grad);
}

// Per-parameter Adam/AMSGrad moments. The running maximum of the second
// moment is kept on the raw (uncorrected) moment and never decreases.
template <typename T>
struct AdamState {
  std::vector<T> first_moment;
  std::vector<T> second_moment;
  std::vector<T> max_second_moment;
  std::int64_t step_count = 0;

  explicit AdamState(std::size_t n = 0)
      : first_moment(n, T(0)), second_moment(n, T(0)), max_second_moment(n, T(0)) {}
};

// One Adam step with bias correction and the AMSGrad running-max denominator.
// Rejects non-finite gradients before touching any state.
template <typename T>
void adam_amsgrad_step(Tensor<T>& param, const std::vector<T>& grad, AdamState<T>& state, T lr,
                       T beta1, T beta2, T eps) {
  if (grad.size() != param.data.size()) {
    throw ShapeError("adam_amsgrad_step: grad size " + std::to_string(grad.size()) +
                     " != param size " + std::to_string(param.data.size()));
  }
  if (state.first_moment.size() != grad.size()) {
    throw ShapeError("adam_amsgrad_step: optimizer state size mismatch");
  }
  if (!(beta1 >= T(0) && beta1 < T(1)) || !(beta2 >= T(0) && beta2 < T(1))) {
    throw NumericError("adam_amsgrad_step: betas must be in [0,1)");
  }
  for (T g : grad) {
    if (!std::isfinite(g)) {
      throw NumericError("adam_amsgrad_step: non-finite gradient value; step rejected");
    }
  }
  const std::int64_t t = state.step_count + 1;
  const T bc1 = T(1) - static_cast<T>(std::pow(static_cast<double>(beta1), t));
  const T bc2 = T(1) - static_cast<T>(std::pow(static_cast<double>(beta2), t));
  for (std::size_t i = 0; i < grad.size(); ++i) {
    T g = grad[i];
    T m = beta1 * state.first_moment[i] + (T(1) - beta1) * g;
    T v = beta2 * state.second_moment[i] + (T(1) - beta2) * g * g;
    state.first_moment[i] = m;
    state.second_moment[i] = v;
    T vmax = std::max(state.max_second_moment[i], v);
    state.max_second_moment[i] = vmax;
    const T m_hat = m / bc1;
    const T denom = std::sqrt(vmax / bc2) + eps;
    param.data[i] -= lr * m_hat / denom;
  }
  state.step_count = t;
}

}  // namespace microsr
