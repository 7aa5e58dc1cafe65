#pragma once

#include <map>
#include <string>
#include <variant>

#include "evflow/estimator.hpp"
#include "evflow/tensor.hpp"

namespace evflow {

// Hyperparameter block values: raw f64 (bit-exact) or string.
using HyperValue = std::variant<double, std::string>;
using HyperMap = std::map<std::string, HyperValue>;

inline double hyper_num(const HyperMap& m, const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) throw DataError("checkpoint missing hyperparameter " + key);
  return std::get<double>(it->second);
}

inline std::string hyper_str(const HyperMap& m, const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) throw DataError("checkpoint missing hyperparameter " + key);
  return std::get<std::string>(it->second);
}

// Checkpoint format "CKPT1": magic, version u32, scalar width u8, named
// parameter table (name, rank, extents, raw little-endian values), then the
// key-value hyperparameter block. Round trip is bit-exact when the scalar
// width matches.
template <typename T>
void write_checkpoint(const std::string& path, const ParameterSet<T>& params,
                      const HyperMap& hyper);

// Returns the stored scalar width in bytes without consuming the file.
int checkpoint_scalar_width(const std::string& path);

// Loads into an existing same-layout ParameterSet (names and shapes must
// match). Values convert if the stored scalar width differs.
template <typename T>
HyperMap read_checkpoint(const std::string& path, ParameterSet<T>& params);

// Reads only the hyperparameter block.
HyperMap read_checkpoint_hyper(const std::string& path);

HyperMap estimator_hyper_map(const EstimatorHyper& h);
EstimatorHyper estimator_hyper_from_map(const HyperMap& m);

template <typename T>
void save_estimator(const std::string& path, const EstimatorModel<T>& model);

template <typename T>
EstimatorModel<T> load_estimator(const std::string& path);

}  // namespace evflow
