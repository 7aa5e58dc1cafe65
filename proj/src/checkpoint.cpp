#include "evflow/checkpoint.hpp"

#include <fstream>

#include "evflow/binio.hpp"

namespace evflow {

namespace {
constexpr char kMagic[] = "CKPT1";
constexpr std::uint32_t kVersion = 1;
}  // namespace

template <typename T>
void write_checkpoint(const std::string& path, const ParameterSet<T>& params,
                      const HyperMap& hyper) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path);
  write_magic(out, kMagic);
  write_le<std::uint32_t>(out, kVersion);
  write_le<std::uint8_t>(out, sizeof(T));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& entry : params.entries) {
    write_str(out, entry.name);
    write_le<std::uint8_t>(out, static_cast<std::uint8_t>(entry.value.shape.size()));
    for (int d : entry.value.shape) write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    out.write(reinterpret_cast<const char*>(entry.value.ptr()),
              static_cast<std::streamsize>(entry.value.data.size() * sizeof(T)));
  }
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(hyper.size()));
  for (const auto& [key, value] : hyper) {
    write_str(out, key);
    if (std::holds_alternative<double>(value)) {
      write_le<std::uint8_t>(out, 0);
      write_le<double>(out, std::get<double>(value));
    } else {
      write_le<std::uint8_t>(out, 1);
      write_str(out, std::get<std::string>(value));
    }
  }
}

int checkpoint_scalar_width(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  expect_magic(in, kMagic);
  read_le<std::uint32_t>(in, "version");
  return read_le<std::uint8_t>(in, "scalar width");
}

namespace {

template <typename T, typename Stored>
void read_values(std::istream& in, Tensor<T>& dst, std::int64_t n) {
  std::vector<Stored> raw(static_cast<std::size_t>(n));
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size() * sizeof(Stored)));
  if (!in) throw DataError("truncated checkpoint parameter data");
  for (std::size_t i = 0; i < raw.size(); ++i) dst.data[i] = static_cast<T>(raw[i]);
}

HyperMap read_hyper_block(std::istream& in) {
  HyperMap hyper;
  const auto count = read_le<std::uint32_t>(in, "hyper count");
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string key = read_str(in);
    const auto tag = read_le<std::uint8_t>(in, "hyper tag");
    if (tag == 0)
      hyper[key] = read_le<double>(in, "hyper value");
    else
      hyper[key] = read_str(in);
  }
  return hyper;
}

template <typename T>
HyperMap read_checkpoint_impl(const std::string& path, ParameterSet<T>* params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  expect_magic(in, kMagic);
  const auto version = read_le<std::uint32_t>(in, "version");
  if (version != kVersion) throw DataError("unsupported checkpoint version");
  const int width = read_le<std::uint8_t>(in, "scalar width");
  if (width != 4 && width != 8) throw DataError("bad checkpoint scalar width");
  const auto count = read_le<std::uint32_t>(in, "parameter count");
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = read_str(in);
    const int rank = read_le<std::uint8_t>(in, "rank");
    std::vector<int> shape;
    std::int64_t n = 1;
    for (int d = 0; d < rank; ++d) {
      shape.push_back(static_cast<int>(read_le<std::uint32_t>(in, "extent")));
      n *= shape.back();
    }
    if (!params) {
      in.seekg(static_cast<std::streamoff>(n * width), std::ios::cur);
      continue;
    }
    if (i >= static_cast<std::uint32_t>(params->size()))
      throw DataError("checkpoint has more parameters than the model");
    auto& entry = params->entries[i];
    if (entry.name != name)
      throw DataError("checkpoint parameter '" + name + "' does not match model '" +
                      entry.name + "'");
    if (entry.value.shape != shape)
      throw DataError("checkpoint shape mismatch for " + name);
    if (width == static_cast<int>(sizeof(T))) {
      in.read(reinterpret_cast<char*>(entry.value.ptr()),
              static_cast<std::streamsize>(entry.value.data.size() * sizeof(T)));
      if (!in) throw DataError("truncated checkpoint parameter data");
    } else if (width == 4) {
      read_values<T, float>(in, entry.value, n);
    } else {
      read_values<T, double>(in, entry.value, n);
    }
  }
  if (params && count != static_cast<std::uint32_t>(params->size()))
    throw DataError("checkpoint has fewer parameters than the model");
  return read_hyper_block(in);
}

}  // namespace

template <typename T>
HyperMap read_checkpoint(const std::string& path, ParameterSet<T>& params) {
  return read_checkpoint_impl<T>(path, &params);
}

HyperMap read_checkpoint_hyper(const std::string& path) {
  return read_checkpoint_impl<float>(path, nullptr);
}

HyperMap estimator_hyper_map(const EstimatorHyper& h) {
  HyperMap m;
  m["model_kind"] = std::string("estimator");
  m["grid_k"] = static_cast<double>(h.grid_k);
  m["alpha"] = h.alpha;
  m["hidden_dim"] = static_cast<double>(h.hidden);
  m["delta_t"] = h.delta_t;
  m["lambda"] = h.lambda;
  m["learning_rate"] = h.learning_rate;
  return m;
}

EstimatorHyper estimator_hyper_from_map(const HyperMap& m) {
  EstimatorHyper h;
  h.grid_k = static_cast<int>(hyper_num(m, "grid_k"));
  h.alpha = hyper_num(m, "alpha");
  h.hidden = static_cast<int>(hyper_num(m, "hidden_dim"));
  h.delta_t = hyper_num(m, "delta_t");
  h.lambda = hyper_num(m, "lambda");
  h.learning_rate = hyper_num(m, "learning_rate");
  return h;
}

template <typename T>
void save_estimator(const std::string& path, const EstimatorModel<T>& model) {
  write_checkpoint(path, model.params, estimator_hyper_map(model.hyper));
}

template <typename T>
EstimatorModel<T> load_estimator(const std::string& path) {
  const HyperMap hyper = read_checkpoint_hyper(path);
  if (hyper_str(hyper, "model_kind") != "estimator")
    throw DataError(path + " is not an estimator checkpoint");
  EstimatorModel<T> model;
  model.build(estimator_hyper_from_map(hyper));
  read_checkpoint(path, model.params);
  return model;
}

template void write_checkpoint<float>(const std::string&, const ParameterSet<float>&,
                                      const HyperMap&);
template void write_checkpoint<double>(const std::string&, const ParameterSet<double>&,
                                       const HyperMap&);
template HyperMap read_checkpoint<float>(const std::string&, ParameterSet<float>&);
template HyperMap read_checkpoint<double>(const std::string&, ParameterSet<double>&);
template void save_estimator<float>(const std::string&, const EstimatorModel<float>&);
template void save_estimator<double>(const std::string&, const EstimatorModel<double>&);
template EstimatorModel<float> load_estimator<float>(const std::string&);
template EstimatorModel<double> load_estimator<double>(const std::string&);

}  // namespace evflow
