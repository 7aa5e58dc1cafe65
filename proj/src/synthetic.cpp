#include "evflow/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "evflow/rng.hpp"

namespace evflow {

ScenePattern scene_pattern_from_string(const std::string& s) {
  if (s == "bar") return ScenePattern::bar;
  if (s == "checker") return ScenePattern::checker;
  if (s == "texture") return ScenePattern::texture;
  throw ConfigError("unknown scene pattern '" + s + "'");
}

std::string to_string(ScenePattern p) {
  switch (p) {
    case ScenePattern::bar: return "bar";
    case ScenePattern::checker: return "checker";
    case ScenePattern::texture: return "texture";
  }
  return "?";
}

namespace {

constexpr double kPi = 3.14159265358979323846;

// Smooth square wave with raised-cosine transitions. u in periods, width in
// periods; returns [-1, 1].
double smooth_square(double u, double w) {
  double s = u - std::floor(u);
  if (s < w / 2)  // rising edge centered at 0
    return -std::cos(kPi * (s + w / 2) / w);
  if (s < 0.5 - w / 2) return 1.0;
  if (s < 0.5 + w / 2)  // falling edge centered at 0.5
    return std::cos(kPi * (s - (0.5 - w / 2)) / w);
  if (s < 1.0 - w / 2) return -1.0;
  return -std::cos(kPi * (s - (1.0 - w / 2)) / w);
}

// Log-intensity pattern sampled on a periodic tile at sub-pixel resolution.
class PatternTable {
 public:
  PatternTable(const SceneSpec& scene) {
    tile_ = scene.pattern == ScenePattern::texture
                ? scene.tile
                : std::max(1, static_cast<int>(std::lround(scene.period)));
    n_ = tile_ * kRes;
    values_.resize(static_cast<std::size_t>(n_) * n_);

    struct Harmonic {
      double kx, ky, phase, amp;
    };
    std::vector<Harmonic> comps;
    if (scene.pattern == ScenePattern::texture) {
      Rng rng(scene.seed * 0x9e3779b97f4a7c15ULL + 17);
      const double amp = scene.amplitude * std::sqrt(2.0 / scene.harmonics);
      while (static_cast<int>(comps.size()) < scene.harmonics) {
        // integer harmonics keep the tile periodic
        const int max_n = static_cast<int>(tile_ / scene.lambda_min) + 1;
        const int nx = static_cast<int>(rng.uniform_int(-max_n, max_n));
        const int ny = static_cast<int>(rng.uniform_int(-max_n, max_n));
        const double wl = tile_ / std::sqrt(double(nx) * nx + double(ny) * ny + 1e-12);
        if (wl < scene.lambda_min || wl > scene.lambda_max) continue;
        comps.push_back({2 * kPi * nx / tile_, 2 * kPi * ny / tile_,
                         rng.uniform(0, 2 * kPi), amp});
      }
    }

    for (int iy = 0; iy < n_; ++iy) {
      for (int ix = 0; ix < n_; ++ix) {
        const double x = static_cast<double>(ix) / kRes;
        const double y = static_cast<double>(iy) / kRes;
        double v = 0;
        switch (scene.pattern) {
          case ScenePattern::bar:
            v = scene.amplitude *
                smooth_square(x / scene.period, scene.edge_width / scene.period);
            break;
          case ScenePattern::checker:
            v = scene.amplitude *
                smooth_square(x / scene.period, scene.edge_width / scene.period) *
                smooth_square(y / scene.period, scene.edge_width / scene.period);
            break;
          case ScenePattern::texture:
            for (const auto& c : comps) v += c.amp * std::cos(c.kx * x + c.ky * y + c.phase);
            break;
        }
        values_[static_cast<std::size_t>(iy) * n_ + ix] = v;
      }
    }
  }

  // Bilinear sample with periodic wrap; coordinates in pixels.
  double sample(double x, double y) const {
    double fx = (x / tile_ - std::floor(x / tile_)) * n_;
    double fy = (y / tile_ - std::floor(y / tile_)) * n_;
    int ix = static_cast<int>(fx);
    int iy = static_cast<int>(fy);
    if (ix >= n_) ix = n_ - 1;
    if (iy >= n_) iy = n_ - 1;
    const double ax = fx - ix, ay = fy - iy;
    const int ix1 = (ix + 1) % n_, iy1 = (iy + 1) % n_;
    const double v00 = at(ix, iy), v10 = at(ix1, iy);
    const double v01 = at(ix, iy1), v11 = at(ix1, iy1);
    return (1 - ax) * ((1 - ay) * v00 + ay * v01) + ax * ((1 - ay) * v10 + ay * v11);
  }

  double grad_mag(double x, double y) const {
    const double gx = (sample(x + 0.5, y) - sample(x - 0.5, y));
    const double gy = (sample(x, y + 0.5) - sample(x, y - 0.5));
    return std::sqrt(gx * gx + gy * gy);
  }

 private:
  static constexpr int kRes = 8;  // samples per pixel
  double at(int ix, int iy) const {
    return values_[static_cast<std::size_t>(iy) * n_ + ix];
  }
  int tile_ = 0;
  int n_ = 0;
  std::vector<double> values_;
};

}  // namespace

void displacement_at(const SceneSpec& scene, double t, double* dx, double* dy) {
  const auto& ks = scene.trajectory;
  require(!ks.empty(), "empty velocity schedule");
  require(t >= 0, "displacement_at: negative time");
  double sx = 0, sy = 0;
  // hold before the first knot
  if (ks.front().t > 0) {
    const double hi = std::min(t, ks.front().t);
    sx += ks.front().vx * hi;
    sy += ks.front().vy * hi;
  }
  for (std::size_t i = 0; i + 1 < ks.size(); ++i) {
    const VelocityKnot& a = ks[i];
    const VelocityKnot& b = ks[i + 1];
    if (b.t <= a.t) continue;  // equal-time knots express a step
    const double lo = std::max(a.t, 0.0);
    const double hi = std::min(b.t, t);
    if (hi <= lo) continue;
    const double span = b.t - a.t;
    auto vat = [&](double tt, double va, double vb) {
      return va + (vb - va) * (tt - a.t) / span;
    };
    sx += 0.5 * (vat(lo, a.vx, b.vx) + vat(hi, a.vx, b.vx)) * (hi - lo);
    sy += 0.5 * (vat(lo, a.vy, b.vy) + vat(hi, a.vy, b.vy)) * (hi - lo);
  }
  // hold after the last knot
  if (t > ks.back().t) {
    const double lo = std::max(ks.back().t, 0.0);
    sx += ks.back().vx * (t - lo);
    sy += ks.back().vy * (t - lo);
  }
  *dx = sx;
  *dy = sy;
}

SyntheticResult render_events(const SceneSpec& scene) {
  if (scene.duration < 0 || scene.contrast <= 0)
    throw ConfigError("scene duration must be >= 0 and contrast > 0");
  SyntheticResult result;
  result.stream.header.width = scene.width;
  result.stream.header.height = scene.height;

  const PatternTable table(scene);
  const int w = scene.width, h = scene.height;
  const std::size_t npx = static_cast<std::size_t>(w) * h;
  std::vector<double> prev(npx), ref(npx);

  double dx0, dy0;
  displacement_at(scene, 0.0, &dx0, &dy0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double v = table.sample(x - dx0, y - dy0);
      prev[static_cast<std::size_t>(y) * w + x] = v;
      ref[static_cast<std::size_t>(y) * w + x] = v;
    }

  const double step = 1.0 / scene.supersample_hz;
  const long nsteps = std::lround(scene.duration / step);
  const double C = scene.contrast;
  for (long si = 1; si <= nsteps; ++si) {
    const double t0 = (si - 1) * step;
    const double t1 = si * step;
    double dx, dy;
    displacement_at(scene, t1, &dx, &dy);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        const double cur = table.sample(x - dx, y - dy);
        const double last = prev[i];
        if (cur != last) {
          const double pol = cur > last ? 1.0 : -1.0;
          double cross = ref[i];
          while (true) {
            cross += pol * C;
            const bool hit = pol > 0 ? (cross > last && cross <= cur)
                                     : (cross < last && cross >= cur);
            if (!hit) break;
            const double te = t0 + (cross - last) / (cur - last) * step;
            Event e;
            e.t_ns = seconds_to_ns(te);
            e.x = static_cast<std::uint16_t>(x);
            e.y = static_cast<std::uint16_t>(y);
            e.p = pol > 0 ? 1 : -1;
            result.stream.events.push_back(e);
            ref[i] = cross;
          }
          prev[i] = cur;
        }
      }
    }
  }
  std::stable_sort(result.stream.events.begin(), result.stream.events.end(),
                   [](const Event& a, const Event& b) { return a.t_ns < b.t_ns; });
  if (!result.stream.events.empty()) {
    result.stream.header.t_min_ns = result.stream.events.front().t_ns;
    result.stream.header.t_max_ns = result.stream.events.back().t_ns;
  }

  const int nslices = static_cast<int>(std::floor(scene.duration / scene.delta_t + 1e-9));
  for (int n = 0; n < nslices; ++n) {
    const double ts = n * scene.delta_t;
    const double te = (n + 1) * scene.delta_t;
    DenseFlowField f(w, h);
    f.t_start = ts;
    f.t_end = te;
    double dxs, dys, dxe, dye;
    displacement_at(scene, ts, &dxs, &dys);
    displacement_at(scene, te, &dxe, &dye);
    const float u = static_cast<float>(dxe - dxs);
    const float v = static_cast<float>(dye - dys);
    const double tm = 0.5 * (ts + te);
    double dxm, dym;
    displacement_at(scene, tm, &dxm, &dym);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = f.idx(x, y);
        f.u[i] = u;
        f.v[i] = v;
        f.valid[i] = table.grad_mag(x - dxm, y - dym) >= scene.mask_grad_min ? 1 : 0;
      }
    }
    result.gt.push_back(std::move(f));
  }
  return result;
}

EventStream perturb(const EventStream& stream, double noise_rate_ev_px_s,
                    double jitter_sigma_s, std::uint64_t seed) {
  if (noise_rate_ev_px_s < 0 || jitter_sigma_s < 0)
    throw ConfigError("perturb rates must be non-negative");
  EventStream out = stream;
  if (noise_rate_ev_px_s == 0 && jitter_sigma_s == 0) return out;
  Rng rng(seed);
  const TimeNs t0 = stream.header.t_min_ns, t1 = stream.header.t_max_ns;
  if (jitter_sigma_s > 0) {
    for (Event& e : out.events) {
      const double jt = ns_to_seconds(e.t_ns) + rng.normal(0.0, jitter_sigma_s);
      e.t_ns = std::clamp(seconds_to_ns(jt), t0, t1);
    }
  }
  if (noise_rate_ev_px_s > 0 && !stream.empty()) {
    const double area = static_cast<double>(stream.header.width) * stream.header.height;
    const double span = ns_to_seconds(t1 - t0);
    const std::int64_t count = rng.poisson(noise_rate_ev_px_s * area * span);
    for (std::int64_t i = 0; i < count; ++i) {
      Event e;
      e.t_ns = t0 + static_cast<TimeNs>(rng.uniform() * static_cast<double>(t1 - t0));
      e.x = static_cast<std::uint16_t>(rng.uniform_int(0, stream.header.width - 1));
      e.y = static_cast<std::uint16_t>(rng.uniform_int(0, stream.header.height - 1));
      e.p = rng.uniform() < 0.5 ? -1 : 1;
      out.events.push_back(e);
    }
  }
  std::stable_sort(out.events.begin(), out.events.end(),
                   [](const Event& a, const Event& b) { return a.t_ns < b.t_ns; });
  return out;
}

}  // namespace evflow
