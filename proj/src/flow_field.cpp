#include "evflow/flow_field.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "evflow/binio.hpp"

namespace evflow {

void write_flow_file(const std::string& path, const DenseFlowField& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write flow file " + path);
  write_magic(out, "FLW1");
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(f.width));
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(f.height));
  write_le<double>(out, f.t_start);
  write_le<double>(out, f.t_end);
  for (std::size_t i = 0; i < f.u.size(); ++i) {
    write_le<float>(out, f.u[i]);
    write_le<float>(out, f.v[i]);
  }
  out.write(reinterpret_cast<const char*>(f.valid.data()),
            static_cast<std::streamsize>(f.valid.size()));
}

DenseFlowField read_flow_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open flow file " + path);
  expect_magic(in, "FLW1");
  const int w = read_le<std::uint16_t>(in, "width");
  const int h = read_le<std::uint16_t>(in, "height");
  DenseFlowField f(w, h);
  f.t_start = read_le<double>(in, "t_start");
  f.t_end = read_le<double>(in, "t_end");
  for (std::size_t i = 0; i < f.u.size(); ++i) {
    f.u[i] = read_le<float>(in, "u");
    f.v[i] = read_le<float>(in, "v");
  }
  in.read(reinterpret_cast<char*>(f.valid.data()),
          static_cast<std::streamsize>(f.valid.size()));
  if (!in) throw DataError("truncated flow file " + path);
  return f;
}

namespace {

// Middlebury-style color wheel segment counts.
constexpr int kRY = 15, kYG = 6, kGC = 4, kCB = 11, kBM = 13, kMR = 6;
constexpr int kWheelSize = kRY + kYG + kGC + kCB + kBM + kMR;

void build_wheel(std::uint8_t wheel[kWheelSize][3]) {
  int col = 0;
  for (int i = 0; i < kRY; ++i, ++col) {
    wheel[col][0] = 255;
    wheel[col][1] = static_cast<std::uint8_t>(255 * i / kRY);
    wheel[col][2] = 0;
  }
  for (int i = 0; i < kYG; ++i, ++col) {
    wheel[col][0] = static_cast<std::uint8_t>(255 - 255 * i / kYG);
    wheel[col][1] = 255;
    wheel[col][2] = 0;
  }
  for (int i = 0; i < kGC; ++i, ++col) {
    wheel[col][0] = 0;
    wheel[col][1] = 255;
    wheel[col][2] = static_cast<std::uint8_t>(255 * i / kGC);
  }
  for (int i = 0; i < kCB; ++i, ++col) {
    wheel[col][0] = 0;
    wheel[col][1] = static_cast<std::uint8_t>(255 - 255 * i / kCB);
    wheel[col][2] = 255;
  }
  for (int i = 0; i < kBM; ++i, ++col) {
    wheel[col][0] = static_cast<std::uint8_t>(255 * i / kBM);
    wheel[col][1] = 0;
    wheel[col][2] = 255;
  }
  for (int i = 0; i < kMR; ++i, ++col) {
    wheel[col][0] = 255;
    wheel[col][1] = 0;
    wheel[col][2] = static_cast<std::uint8_t>(255 - 255 * i / kMR);
  }
}

}  // namespace

void write_flow_ppm(const std::string& path, const DenseFlowField& f, double max_magnitude) {
  if (max_magnitude <= 0) throw ConfigError("viz max magnitude must be positive");
  std::uint8_t wheel[kWheelSize][3];
  build_wheel(wheel);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write image " + path);
  out << "P6\n" << f.width << " " << f.height << "\n255\n";
  std::vector<std::uint8_t> row(static_cast<std::size_t>(f.width) * 3);
  for (int y = 0; y < f.height; ++y) {
    for (int x = 0; x < f.width; ++x) {
      const std::size_t i = f.idx(x, y);
      std::uint8_t rgb[3] = {0, 0, 0};
      if (f.valid[i]) {
        const double u = f.u[i], v = f.v[i];
        const double mag = std::min(std::sqrt(u * u + v * v) / max_magnitude, 1.0);
        const double angle = std::atan2(-v, -u) / 3.14159265358979323846;
        const double fk = (angle + 1.0) / 2.0 * (kWheelSize - 1);
        const int k0 = std::min(static_cast<int>(fk), kWheelSize - 1);
        const int k1 = (k0 + 1) % kWheelSize;
        const double frac = fk - k0;
        for (int ch = 0; ch < 3; ++ch) {
          double c = (1 - frac) * wheel[k0][ch] / 255.0 + frac * wheel[k1][ch] / 255.0;
          c = 1.0 - mag * (1.0 - c);  // desaturate toward white at low magnitude
          rgb[ch] = static_cast<std::uint8_t>(std::lround(255.0 * c));
        }
      }
      row[static_cast<std::size_t>(x) * 3] = rgb[0];
      row[static_cast<std::size_t>(x) * 3 + 1] = rgb[1];
      row[static_cast<std::size_t>(x) * 3 + 2] = rgb[2];
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size()));
  }
}

}  // namespace evflow
