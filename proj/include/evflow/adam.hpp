#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "evflow/tensor.hpp"

namespace evflow {

// Bias-corrected Adam over a ParameterSet. Deterministic given inputs.
template <typename T>
struct AdamState {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<std::vector<T>> m, v;

  explicit AdamState(const ParameterSet<T>& params, double lr = 5e-4)
      : learning_rate(lr) {
    m.resize(static_cast<std::size_t>(params.size()));
    v.resize(static_cast<std::size_t>(params.size()));
    for (int i = 0; i < params.size(); ++i) {
      m[static_cast<std::size_t>(i)].assign(params[i].data.size(), T(0));
      v[static_cast<std::size_t>(i)].assign(params[i].data.size(), T(0));
    }
  }
};

template <typename T>
void adam_update(ParameterSet<T>& params, const GradBuffer<T>& grads, AdamState<T>& st) {
  st.step += 1;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (int p = 0; p < params.size(); ++p) {
    auto& value = params[p].data;
    const auto& g = grads.grads[static_cast<std::size_t>(p)];
    auto& m = st.m[static_cast<std::size_t>(p)];
    auto& v = st.v[static_cast<std::size_t>(p)];
    require(g.size() == value.size(), "adam_update: gradient shape mismatch");
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = st.beta1 * static_cast<double>(m[i]) + (1.0 - st.beta1) * gi;
      const double vi = st.beta2 * static_cast<double>(v[i]) + (1.0 - st.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double mhat = mi / bc1;
      const double vhat = vi / bc2;
      value[i] = static_cast<T>(static_cast<double>(value[i]) -
                                st.learning_rate * mhat / (std::sqrt(vhat) + st.eps));
    }
  }
}

}  // namespace evflow
