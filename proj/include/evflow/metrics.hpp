#pragma once

#include <map>
#include <string>
#include <vector>

#include "evflow/events.hpp"
#include "evflow/flow_field.hpp"

namespace evflow {

// Per-pixel boolean evaluation mask: ground-truth valid AND (optionally)
// event-active within the evaluation interval.
std::vector<std::uint8_t> make_eval_mask(const DenseFlowField& gt,
                                         const std::vector<std::uint8_t>* event_active);

// Pixels with at least one event in [t_start_ns, t_end_ns).
std::vector<std::uint8_t> event_active_mask(const EventStream& stream, TimeNs t_start_ns,
                                            TimeNs t_end_ns);

// Mean Euclidean distance between predicted and ground-truth flow over
// masked pixels. Throws DataError on an empty mask.
double epe(const DenseFlowField& pred, const DenseFlowField& gt,
           const std::vector<std::uint8_t>& mask);

// Percentage of masked pixels with endpoint error strictly greater than
// n pixels. outlier_ratio is npe with n = 3.
double npe(const DenseFlowField& pred, const DenseFlowField& gt,
           const std::vector<std::uint8_t>& mask, double n);
double outlier_ratio(const DenseFlowField& pred, const DenseFlowField& gt,
                     const std::vector<std::uint8_t>& mask, double threshold = 3.0);

// Projected endpoint error: || f_pred - (f_gt . u_hat) u_hat || with u_hat
// the predicted flow direction. Zero-prediction pixels are skipped; their
// count is reported through `skipped` when non-null.
double pee(const DenseFlowField& pred, const DenseFlowField& gt,
           const std::vector<std::uint8_t>& mask, std::size_t* skipped = nullptr);

// Mean angular error over homogeneous vectors (u, v, 1), in degrees.
double angular_error(const DenseFlowField& pred, const DenseFlowField& gt,
                     const std::vector<std::uint8_t>& mask);

// Report: tab-separated `metric value count` lines plus a key=value block.
struct EvalReport {
  struct Line {
    std::string metric;
    double value;
    std::size_t count;
  };
  std::vector<Line> lines;
  std::map<std::string, std::string> info;

  void add(const std::string& metric, double value, std::size_t count) {
    lines.push_back({metric, value, count});
  }
  std::string to_string() const;
};

}  // namespace evflow
