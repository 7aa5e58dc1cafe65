#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "evflow/events.hpp"
#include "evflow/tape.hpp"
#include "evflow/tensor.hpp"

namespace evflow {

// Model-level hyperparameters carried by every checkpoint.
struct EstimatorHyper {
  int grid_k = 15;
  double alpha = 100.0;
  int hidden = 256;
  double delta_t = 0.05;     // supervision interval, seconds
  double lambda = 0.2;       // confidence balancing coefficient
  double learning_rate = 5e-4;

  TimeNs delta_t_ns() const { return seconds_to_ns(delta_t); }
};

// Intermediate widths of the confidence head for a given hidden size:
// geometric taper H, H/2, H/4, H/8, H/16, 1 (floored at 4).
std::vector<int> confidence_head_widths(int hidden);

// Recurrent cell plus flow/confidence heads. Parameters live in a flat
// named set; the struct keeps indices for direct access.
template <typename T>
struct EstimatorModel {
  EstimatorHyper hyper;
  ParameterSet<T> params;

  // GRU gates: update z, reset r, candidate h
  int wz = -1, uz = -1, bz = -1;
  int wr = -1, ur = -1, br = -1;
  int wh = -1, uh = -1, bh = -1;
  // flow head: H -> 64 -> 2
  int fw1 = -1, fb1 = -1, fw2 = -1, fb2 = -1;
  // confidence head: tapered dense chain ending in one logit
  std::vector<int> cw, cb;
  std::vector<int> conf_widths;

  static constexpr int kInputDim = 4;
  static constexpr int kFlowHidden = 64;

  void build(const EstimatorHyper& h);
  void init_weights(Rng& rng);

  // Scratch buffers for the plain (non-recording) forward path.
  struct Workspace {
    std::vector<T> a, b, c, d;
  };

  // One recurrent update. x is the 4-vector embedding; h_prev and h_out may
  // not alias. Mirrors the tape op sequence exactly.
  void gru_step(const T* x, const T* h_prev, T* h_out, Workspace& ws) const;

  void flow_head(const T* h, T out[2], Workspace& ws) const;
  T conf_head(const T* h, Workspace& ws) const;

  // Tape bindings for training. `Bound` caches the parameter leaf ids.
  struct Bound {
    int wz, uz, bz, wr, ur, br, wh, uh, bh;
    int fw1, fb1, fw2, fb2;
    std::vector<int> cw, cb;
  };
  Bound bind(Tape<T>& tape) const;
  int gru_step_t(Tape<T>& tape, const Bound& m, int x, int h_prev) const;
  int flow_head_t(Tape<T>& tape, const Bound& m, int h) const;
  int conf_head_t(Tape<T>& tape, const Bound& m, int h) const;  // sigmoid output
};

// Persistent recurrent state for one deployed grid.
template <typename T>
struct GridState {
  std::vector<T> h;
  TimeNs t_prev_ns = 0;
  std::uint64_t event_count = 0;  // since last reset
  bool started = false;           // first event after reset pending
  int ix = 0, iy = 0;

  void reset() {
    std::fill(h.begin(), h.end(), T(0));
    event_count = 0;
    started = false;
  }
};

struct LocalPrediction {
  TimeNs t_ns = 0;  // query timestamp (absolute)
  int center_x = 0;
  int center_y = 0;
  float u = 0, v = 0;   // pixels per the checkpoint's delta_t
  float confidence = 0; // in (0,1)
  std::uint64_t event_count = 0;
};

struct StreamOptions {
  int min_events = 10;
  std::int64_t reset_every = 0;  // slices between state clears; 0 = never
  TimeNs origin_ns = 0;          // slicing origin
  TimeNs dt_ns = 50'000'000;     // slice length
};

// Event-driven pass over one event stream: per-grid updates interleaved
// with queries. All updates with t <= query time are applied before the
// query; slice-boundary resets apply strictly before boundary events and
// strictly after queries that land exactly on a boundary.
template <typename T>
class StreamProcessor {
 public:
  StreamProcessor(const EstimatorModel<T>& model, const GridLattice& lattice,
                  const StreamOptions& opts);

  // Consumes events and emits predictions at the given query times (both
  // ascending). May be called repeatedly with consecutive chunks.
  void process(std::span<const Event> events, std::span<const TimeNs> query_times,
               std::vector<LocalPrediction>& out);

  void update(const Event& e);
  void query_all(TimeNs t_ns, std::vector<LocalPrediction>& out);
  void reset_all();

  const GridLattice& lattice() const { return lattice_; }
  const StreamOptions& options() const { return opts_; }
  TimeNs t_done() const { return t_done_; }
  std::int64_t slices_entered() const { return slices_entered_; }

  // Chunked-processing persistence.
  void save_state(const std::string& path) const;
  void load_state(const std::string& path);

  std::unordered_map<int, GridState<T>>& states() { return states_; }

 private:
  void advance_slices(std::int64_t target_boundary);
  GridState<T>& state_for(int ix, int iy);

  const EstimatorModel<T>& model_;
  GridLattice lattice_;
  StreamOptions opts_;
  std::unordered_map<int, GridState<T>> states_;
  std::int64_t slices_entered_ = 0;
  TimeNs t_done_ = std::numeric_limits<TimeNs>::min();
  mutable typename EstimatorModel<T>::Workspace ws_;
  std::vector<T> h_next_;
};

// One-shot convenience wrapper.
template <typename T>
std::vector<LocalPrediction> process_stream(const EstimatorModel<T>& model,
                                            const GridLattice& lattice,
                                            std::span<const Event> events,
                                            std::span<const TimeNs> query_times,
                                            const StreamOptions& opts);

// Prediction output format "LPR1". Binary record: u64 t_rel_ns, u16 xc,
// u16 yc, f32 u, f32 v, f32 c, u32 event_count. Timestamps are stored
// relative to the run origin so outputs are invariant to absolute clock.
void write_predictions_binary(std::ostream& out, const std::vector<LocalPrediction>& preds,
                              int width, int height, TimeNs origin_ns);
void write_predictions_text(std::ostream& out, const std::vector<LocalPrediction>& preds,
                            int width, int height, TimeNs origin_ns);
void write_predictions_file(const std::string& path, const std::vector<LocalPrediction>& preds,
                            int width, int height, TimeNs origin_ns, bool binary = true);
std::vector<LocalPrediction> read_predictions_file(const std::string& path, int* width = nullptr,
                                                   int* height = nullptr);

extern template struct EstimatorModel<float>;
extern template struct EstimatorModel<double>;
extern template class StreamProcessor<float>;
extern template class StreamProcessor<double>;

}  // namespace evflow
