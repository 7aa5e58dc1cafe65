#pragma once

#include <string>
#include <vector>

#include "evflow/events.hpp"
#include "evflow/flow_field.hpp"

namespace evflow {

enum class ScenePattern { bar, checker, texture };

ScenePattern scene_pattern_from_string(const std::string& s);
std::string to_string(ScenePattern p);

// Piecewise-linear velocity schedule in px/s. Knots must be time-ordered;
// values outside the knot range hold the nearest endpoint. Equal-time knot
// pairs express steps.
struct VelocityKnot {
  double t = 0;
  double vx = 0, vy = 0;
};

struct SceneSpec {
  ScenePattern pattern = ScenePattern::texture;
  int width = 240;
  int height = 180;
  double duration = 1.0;       // seconds
  double delta_t = 0.05;       // ground-truth slice interval, seconds
  double contrast = 0.25;      // threshold C in log-intensity units
  std::uint64_t seed = 1;
  std::vector<VelocityKnot> trajectory{{0.0, 60.0, 0.0}};

  // pattern shape
  double amplitude = 0.5;      // log-intensity amplitude
  double period = 24.0;        // bar/checker period, pixels
  double edge_width = 2.0;     // bar/checker transition width, pixels
  double lambda_min = 10.0;    // texture wavelength band, pixels
  double lambda_max = 40.0;
  int harmonics = 24;          // texture component count
  int tile = 128;              // texture periodic tile, pixels

  double supersample_hz = 10000.0;  // crossing-detection rate
  double mask_grad_min = 0.01;      // |grad log I| threshold for GT validity
};

// Closed-form rigid-translation ground truth.
struct SyntheticResult {
  EventStream stream;
  std::vector<DenseFlowField> gt;  // one per delta_t slice
};

// Pattern displacement at time t (integral of the velocity schedule), px.
void displacement_at(const SceneSpec& scene, double t, double* dx, double* dy);

// Log-intensity threshold event model with per-pixel reference reset at each
// event and linear interpolation of crossing times.
SyntheticResult render_events(const SceneSpec& scene);

// Background noise events plus Gaussian timestamp jitter, re-sorted.
EventStream perturb(const EventStream& stream, double noise_rate_ev_px_s,
                    double jitter_sigma_s, std::uint64_t seed);

}  // namespace evflow
