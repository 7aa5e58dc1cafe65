#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evflow/common.hpp"

namespace evflow {

// Full-resolution 2-channel flow map with validity mask. Flow units are
// pixels per the producing interval [t_start, t_end].
struct DenseFlowField {
  int width = 0;
  int height = 0;
  double t_start = 0;  // seconds
  double t_end = 0;
  std::vector<float> u, v;        // row-major, width*height each
  std::vector<std::uint8_t> valid;

  DenseFlowField() = default;
  DenseFlowField(int w, int h)
      : width(w), height(h),
        u(static_cast<std::size_t>(w) * h, 0.f),
        v(static_cast<std::size_t>(w) * h, 0.f),
        valid(static_cast<std::size_t>(w) * h, 0) {}

  std::size_t idx(int x, int y) const {
    return static_cast<std::size_t>(y) * width + x;
  }
};

// Ground-truth / dense-flow file format "FLW1": magic, u16 W, u16 H,
// f64 t_start, f64 t_end, W*H interleaved (u, v) little-endian f32 pairs in
// row-major order, then W*H u8 validity mask.
void write_flow_file(const std::string& path, const DenseFlowField& field);
DenseFlowField read_flow_file(const std::string& path);

// Standard color-wheel flow visualization as a binary PPM (P6): hue encodes
// direction, saturation encodes magnitude relative to max_magnitude.
void write_flow_ppm(const std::string& path, const DenseFlowField& field,
                    double max_magnitude);

}  // namespace evflow
