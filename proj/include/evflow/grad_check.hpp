#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "evflow/rng.hpp"
#include "evflow/tensor.hpp"

namespace evflow {

// Central-difference verification of analytic gradients. `f` must be a
// deterministic, twice-differentiable function of the parameter set at the
// evaluation point (kinks such as relu at exactly zero are excluded by
// contract). Checks every coordinate unless max_coords_per_param limits the
// sample; returns the worst relative error.
template <typename T>
double finite_diff_check(ParameterSet<T>& params, const GradBuffer<T>& analytic,
                         const std::function<double(const ParameterSet<T>&)>& f,
                         double step = 1e-6, int max_coords_per_param = 0,
                         std::uint64_t seed = 7) {
  Rng rng(seed);
  double worst = 0.0;
  for (int p = 0; p < params.size(); ++p) {
    auto& data = params[p].data;
    const std::size_t n = data.size();
    std::size_t checks = n;
    if (max_coords_per_param > 0 && n > static_cast<std::size_t>(max_coords_per_param))
      checks = static_cast<std::size_t>(max_coords_per_param);
    for (std::size_t c = 0; c < checks; ++c) {
      const std::size_t i =
          checks == n ? c
                      : static_cast<std::size_t>(
                            rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
      const T saved = data[i];
      data[i] = static_cast<T>(static_cast<double>(saved) + step);
      const double fp = f(params);
      data[i] = static_cast<T>(static_cast<double>(saved) - step);
      const double fm = f(params);
      data[i] = saved;
      const double numeric = (fp - fm) / (2.0 * step);
      const double exact = static_cast<double>(analytic.grads[static_cast<std::size_t>(p)][i]);
      const double scale = std::max({std::abs(numeric), std::abs(exact), 1e-8});
      const double rel = std::abs(numeric - exact) / scale;
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace evflow
