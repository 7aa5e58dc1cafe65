#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "evflow/common.hpp"
#include "evflow/rng.hpp"

namespace evflow {

// Dense row-major tensor. Scalar width is a template parameter: f64 for
// gradient-check builds, f32 for training and inference.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(static_cast<std::size_t>(count(shape)), T(0));
  }

  static std::int64_t count(const std::vector<int>& s) {
    std::int64_t n = 1;
    for (int d : s) n *= d;
    return n;
  }

  std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  void fill_uniform(Rng& rng, double lo, double hi) {
    for (auto& v : data) v = static_cast<T>(rng.uniform(lo, hi));
  }
};

// Named parameter bundle. Models hold indices into this set; the optimizer
// and the checkpoint reader/writer see only the flat list.
template <typename T>
struct ParameterSet {
  struct Entry {
    std::string name;
    Tensor<T> value;
  };
  std::vector<Entry> entries;

  int add(const std::string& name, std::vector<int> shape) {
    entries.push_back(Entry{name, Tensor<T>(std::move(shape))});
    return static_cast<int>(entries.size()) - 1;
  }

  Tensor<T>& operator[](int i) { return entries[static_cast<std::size_t>(i)].value; }
  const Tensor<T>& operator[](int i) const {
    return entries[static_cast<std::size_t>(i)].value;
  }
  int size() const { return static_cast<int>(entries.size()); }
};

// Per-parameter gradient accumulator, shape-aligned with a ParameterSet.
template <typename T>
struct GradBuffer {
  std::vector<std::vector<T>> grads;

  explicit GradBuffer(const ParameterSet<T>& params) {
    grads.resize(static_cast<std::size_t>(params.size()));
    for (int i = 0; i < params.size(); ++i)
      grads[static_cast<std::size_t>(i)].assign(params[i].data.size(), T(0));
  }

  void zero() {
    for (auto& g : grads) std::fill(g.begin(), g.end(), T(0));
  }

  // Fixed-order summation: callers add sample gradients in sample index
  // order so results are bit-identical regardless of thread count.
  void add(const GradBuffer& other) {
    for (std::size_t i = 0; i < grads.size(); ++i)
      for (std::size_t j = 0; j < grads[i].size(); ++j)
        grads[i][j] += other.grads[i][j];
  }
};

// Weight init: uniform in +-1/sqrt(fan_in), biases stay zero.
template <typename T>
void init_linear(Tensor<T>& w, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  w.fill_uniform(rng, -bound, bound);
}

}  // namespace evflow
