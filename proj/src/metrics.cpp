#include "evflow/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace evflow {

namespace {

void check_shapes(const DenseFlowField& pred, const DenseFlowField& gt,
                  const std::vector<std::uint8_t>& mask) {
  if (pred.width != gt.width || pred.height != gt.height)
    throw ContractError("metric: field resolution mismatch");
  if (mask.size() != gt.u.size()) throw ContractError("metric: mask size mismatch");
}

double pixel_epe(const DenseFlowField& pred, const DenseFlowField& gt, std::size_t i) {
  const double du = double(pred.u[i]) - double(gt.u[i]);
  const double dv = double(pred.v[i]) - double(gt.v[i]);
  return std::sqrt(du * du + dv * dv);
}

}  // namespace

std::vector<std::uint8_t> make_eval_mask(const DenseFlowField& gt,
                                         const std::vector<std::uint8_t>* event_active) {
  std::vector<std::uint8_t> mask = gt.valid;
  if (event_active) {
    if (event_active->size() != mask.size())
      throw ContractError("event-active mask size mismatch");
    for (std::size_t i = 0; i < mask.size(); ++i)
      mask[i] = mask[i] && (*event_active)[i];
  }
  return mask;
}

std::vector<std::uint8_t> event_active_mask(const EventStream& stream, TimeNs t_start_ns,
                                            TimeNs t_end_ns) {
  std::vector<std::uint8_t> active(
      static_cast<std::size_t>(stream.header.width) * stream.header.height, 0);
  for (const Event& e : stream.events) {
    if (e.t_ns < t_start_ns || e.t_ns >= t_end_ns) continue;
    active[static_cast<std::size_t>(e.y) * stream.header.width + e.x] = 1;
  }
  return active;
}

double epe(const DenseFlowField& pred, const DenseFlowField& gt,
           const std::vector<std::uint8_t>& mask) {
  check_shapes(pred, gt, mask);
  double sum = 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    sum += pixel_epe(pred, gt, i);
    ++count;
  }
  if (count == 0) throw DataError("epe: empty evaluation mask");
  return sum / static_cast<double>(count);
}

double npe(const DenseFlowField& pred, const DenseFlowField& gt,
           const std::vector<std::uint8_t>& mask, double n) {
  check_shapes(pred, gt, mask);
  std::size_t count = 0, outliers = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    ++count;
    if (pixel_epe(pred, gt, i) > n) ++outliers;  // strictly greater
  }
  if (count == 0) throw DataError("npe: empty evaluation mask");
  return 100.0 * static_cast<double>(outliers) / static_cast<double>(count);
}

double outlier_ratio(const DenseFlowField& pred, const DenseFlowField& gt,
                     const std::vector<std::uint8_t>& mask, double threshold) {
  return npe(pred, gt, mask, threshold);
}

double pee(const DenseFlowField& pred, const DenseFlowField& gt,
           const std::vector<std::uint8_t>& mask, std::size_t* skipped) {
  check_shapes(pred, gt, mask);
  double sum = 0;
  std::size_t count = 0, skip = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    const double pu = pred.u[i], pv = pred.v[i];
    const double norm = std::sqrt(pu * pu + pv * pv);
    if (norm == 0.0) {
      ++skip;
      continue;
    }
    const double ux = pu / norm, uy = pv / norm;
    const double proj = double(gt.u[i]) * ux + double(gt.v[i]) * uy;
    const double du = pu - proj * ux;
    const double dv = pv - proj * uy;
    sum += std::sqrt(du * du + dv * dv);
    ++count;
  }
  if (skipped) *skipped = skip;
  if (count == 0) throw DataError("pee: no pixels with nonzero predicted flow");
  return sum / static_cast<double>(count);
}

double angular_error(const DenseFlowField& pred, const DenseFlowField& gt,
                     const std::vector<std::uint8_t>& mask) {
  check_shapes(pred, gt, mask);
  double sum = 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    const double pu = pred.u[i], pv = pred.v[i];
    const double gu = gt.u[i], gv = gt.v[i];
    const double num = pu * gu + pv * gv + 1.0;
    const double den = std::sqrt(pu * pu + pv * pv + 1.0) * std::sqrt(gu * gu + gv * gv + 1.0);
    double c = num / den;
    c = std::min(1.0, std::max(-1.0, c));
    sum += std::acos(c) * (180.0 / 3.14159265358979323846);
    ++count;
  }
  if (count == 0) throw DataError("angular_error: empty evaluation mask");
  return sum / static_cast<double>(count);
}

std::string EvalReport::to_string() const {
  std::ostringstream out;
  char buf[128];
  for (const Line& l : lines) {
    std::snprintf(buf, sizeof(buf), "%s\t%.9g\t%zu\n", l.metric.c_str(), l.value, l.count);
    out << buf;
  }
  if (!info.empty()) {
    out << "---\n";
    for (const auto& [k, v] : info) out << k << " = " << v << "\n";
  }
  return out.str();
}

}  // namespace evflow
