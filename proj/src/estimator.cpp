#include "evflow/estimator.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "evflow/binio.hpp"
#include "evflow/kernels.hpp"

namespace evflow {

std::vector<int> confidence_head_widths(int hidden) {
  std::vector<int> widths{hidden};
  for (int i = 1; i <= 4; ++i) widths.push_back(std::max(hidden >> i, 4));
  widths.push_back(1);
  return widths;
}

template <typename T>
void EstimatorModel<T>::build(const EstimatorHyper& h) {
  hyper = h;
  params = ParameterSet<T>{};
  const int H = h.hidden;
  wz = params.add("gru.wz", {H, kInputDim});
  uz = params.add("gru.uz", {H, H});
  bz = params.add("gru.bz", {H});
  wr = params.add("gru.wr", {H, kInputDim});
  ur = params.add("gru.ur", {H, H});
  br = params.add("gru.br", {H});
  wh = params.add("gru.wh", {H, kInputDim});
  uh = params.add("gru.uh", {H, H});
  bh = params.add("gru.bh", {H});
  fw1 = params.add("flow.w1", {kFlowHidden, H});
  fb1 = params.add("flow.b1", {kFlowHidden});
  fw2 = params.add("flow.w2", {2, kFlowHidden});
  fb2 = params.add("flow.b2", {2});
  conf_widths = confidence_head_widths(H);
  cw.clear();
  cb.clear();
  for (std::size_t i = 0; i + 1 < conf_widths.size(); ++i) {
    cw.push_back(params.add("conf.w" + std::to_string(i),
                            {conf_widths[i + 1], conf_widths[i]}));
    cb.push_back(params.add("conf.b" + std::to_string(i), {conf_widths[i + 1]}));
  }
}

template <typename T>
void EstimatorModel<T>::init_weights(Rng& rng) {
  const int H = hyper.hidden;
  for (int idx : {wz, wr, wh}) init_linear(params[idx], kInputDim, rng);
  for (int idx : {uz, ur, uh}) init_linear(params[idx], H, rng);
  init_linear(params[fw1], H, rng);
  init_linear(params[fw2], kFlowHidden, rng);
  for (std::size_t i = 0; i < cw.size(); ++i)
    init_linear(params[cw[i]], conf_widths[i], rng);
}

template <typename T>
void EstimatorModel<T>::gru_step(const T* x, const T* h_prev, T* h_out,
                                 Workspace& ws) const {
  const int H = hyper.hidden;
  ws.a.resize(static_cast<std::size_t>(H));  // z
  ws.b.resize(static_cast<std::size_t>(H));  // r, then candidate
  ws.c.resize(static_cast<std::size_t>(H));  // r (*) h_prev
  affine2(params[wz].ptr(), x, kInputDim, params[uz].ptr(), h_prev, H,
          params[bz].ptr(), ws.a.data(), H);
  sigmoid_vec(ws.a.data(), ws.a.data(), H);
  affine2(params[wr].ptr(), x, kInputDim, params[ur].ptr(), h_prev, H,
          params[br].ptr(), ws.b.data(), H);
  sigmoid_vec(ws.b.data(), ws.b.data(), H);
  for (int i = 0; i < H; ++i) ws.c[i] = ws.b[i] * h_prev[i];
  affine2(params[wh].ptr(), x, kInputDim, params[uh].ptr(), ws.c.data(), H,
          params[bh].ptr(), ws.b.data(), H);
  tanh_vec(ws.b.data(), ws.b.data(), H);
  // h = h_prev + z (*) (candidate - h_prev), same form as the tape path
  for (int i = 0; i < H; ++i) h_out[i] = h_prev[i] + ws.a[i] * (ws.b[i] - h_prev[i]);
}

template <typename T>
void EstimatorModel<T>::flow_head(const T* h, T out[2], Workspace& ws) const {
  ws.a.resize(kFlowHidden);
  affine(params[fw1].ptr(), h, params[fb1].ptr(), ws.a.data(), kFlowHidden, hyper.hidden);
  relu_vec(ws.a.data(), ws.a.data(), kFlowHidden);
  affine(params[fw2].ptr(), ws.a.data(), params[fb2].ptr(), out, 2, kFlowHidden);
}

template <typename T>
T EstimatorModel<T>::conf_head(const T* h, Workspace& ws) const {
  const T* cur = h;
  for (std::size_t i = 0; i < cw.size(); ++i) {
    const int rows = conf_widths[i + 1];
    const int cols = conf_widths[i];
    auto& dst = (i % 2 == 0) ? ws.a : ws.b;
    dst.resize(static_cast<std::size_t>(rows));
    affine(params[cw[i]].ptr(), cur, params[cb[i]].ptr(), dst.data(), rows, cols);
    if (i + 1 < cw.size()) relu_vec(dst.data(), dst.data(), rows);
    cur = dst.data();
  }
  return sigmoid_scalar(cur[0]);
}

template <typename T>
typename EstimatorModel<T>::Bound EstimatorModel<T>::bind(Tape<T>& tape) const {
  Bound m;
  m.wz = tape.param(wz, params[wz]);
  m.uz = tape.param(uz, params[uz]);
  m.bz = tape.param(bz, params[bz]);
  m.wr = tape.param(wr, params[wr]);
  m.ur = tape.param(ur, params[ur]);
  m.br = tape.param(br, params[br]);
  m.wh = tape.param(wh, params[wh]);
  m.uh = tape.param(uh, params[uh]);
  m.bh = tape.param(bh, params[bh]);
  m.fw1 = tape.param(fw1, params[fw1]);
  m.fb1 = tape.param(fb1, params[fb1]);
  m.fw2 = tape.param(fw2, params[fw2]);
  m.fb2 = tape.param(fb2, params[fb2]);
  for (std::size_t i = 0; i < cw.size(); ++i) {
    m.cw.push_back(tape.param(cw[i], params[cw[i]]));
    m.cb.push_back(tape.param(cb[i], params[cb[i]]));
  }
  return m;
}

template <typename T>
int EstimatorModel<T>::gru_step_t(Tape<T>& tape, const Bound& m, int x, int h_prev) const {
  const int H = hyper.hidden;
  const int z = tape.sigmoid(tape.affine2(m.wz, x, kInputDim, m.uz, h_prev, H, m.bz, H));
  const int r = tape.sigmoid(tape.affine2(m.wr, x, kInputDim, m.ur, h_prev, H, m.br, H));
  const int rh = tape.mul(r, h_prev);
  const int cand = tape.tanh_(tape.affine2(m.wh, x, kInputDim, m.uh, rh, H, m.bh, H));
  const int delta = tape.sub(cand, h_prev);
  return tape.add(h_prev, tape.mul(z, delta));
}

template <typename T>
int EstimatorModel<T>::flow_head_t(Tape<T>& tape, const Bound& m, int h) const {
  const int t1 = tape.relu(tape.affine(m.fw1, h, m.fb1, kFlowHidden, hyper.hidden));
  return tape.affine(m.fw2, t1, m.fb2, 2, kFlowHidden);
}

template <typename T>
int EstimatorModel<T>::conf_head_t(Tape<T>& tape, const Bound& m, int h) const {
  int cur = h;
  for (std::size_t i = 0; i < m.cw.size(); ++i) {
    cur = tape.affine(m.cw[i], cur, m.cb[i], conf_widths[i + 1], conf_widths[i]);
    if (i + 1 < m.cw.size()) cur = tape.relu(cur);
  }
  return tape.sigmoid(cur);
}

template <typename T>
StreamProcessor<T>::StreamProcessor(const EstimatorModel<T>& model,
                                    const GridLattice& lattice, const StreamOptions& opts)
    : model_(model), lattice_(lattice), opts_(opts) {
  if (lattice.k != model.hyper.grid_k)
    throw ConfigError("lattice K does not match the checkpoint");
  h_next_.resize(static_cast<std::size_t>(model.hyper.hidden));
}

template <typename T>
GridState<T>& StreamProcessor<T>::state_for(int ix, int iy) {
  const int key = lattice_.grid_index(ix, iy);
  auto it = states_.find(key);
  if (it == states_.end()) {
    GridState<T> st;
    st.h.assign(static_cast<std::size_t>(model_.hyper.hidden), T(0));
    st.ix = ix;
    st.iy = iy;
    it = states_.emplace(key, std::move(st)).first;
  }
  return it->second;
}

template <typename T>
void StreamProcessor<T>::reset_all() {
  for (auto& [key, st] : states_) st.reset();
}

template <typename T>
void StreamProcessor<T>::advance_slices(std::int64_t target_boundary) {
  while (slices_entered_ < target_boundary) {
    ++slices_entered_;
    if (opts_.reset_every > 0 && slices_entered_ % opts_.reset_every == 0) reset_all();
  }
}

template <typename T>
void StreamProcessor<T>::update(const Event& e) {
  if (opts_.reset_every > 0)
    advance_slices(slice_of(e.t_ns, opts_.origin_ns, opts_.dt_ns));
  const auto [x0, x1] = lattice_.covering_range_x(e.x);
  const auto [y0, y1] = lattice_.covering_range_y(e.y);
  for (int iy = y0; iy <= y1; ++iy) {
    for (int ix = x0; ix <= x1; ++ix) {
      GridState<T>& st = state_for(ix, iy);
      const TimeNs t_prev = st.started ? st.t_prev_ns : e.t_ns;
      const LocalEmbedding emb = embed_event(e, lattice_.center_x(ix), lattice_.center_y(iy),
                                             lattice_.k, model_.hyper.alpha, t_prev);
      const T x[4] = {static_cast<T>(emb.nx), static_cast<T>(emb.ny),
                      static_cast<T>(emb.dt_scaled), static_cast<T>(emb.p)};
      model_.gru_step(x, st.h.data(), h_next_.data(), ws_);
      st.h.swap(h_next_);
      st.t_prev_ns = e.t_ns;
      st.started = true;
      ++st.event_count;
    }
  }
  if (e.t_ns > t_done_) t_done_ = e.t_ns;
}

template <typename T>
void StreamProcessor<T>::query_all(TimeNs t_ns, std::vector<LocalPrediction>& out) {
  if (opts_.reset_every > 0 && t_ns > opts_.origin_ns) {
    // boundaries strictly before the query; a query exactly on a slice
    // boundary still sees the closing slice
    advance_slices((t_ns - opts_.origin_ns - 1) / opts_.dt_ns);
  }
  for (int iy = 0; iy < lattice_.rows; ++iy) {
    for (int ix = 0; ix < lattice_.cols; ++ix) {
      auto it = states_.find(lattice_.grid_index(ix, iy));
      if (it == states_.end()) continue;
      const GridState<T>& st = it->second;
      if (st.event_count < static_cast<std::uint64_t>(opts_.min_events)) continue;
      T flow[2];
      model_.flow_head(st.h.data(), flow, ws_);
      const T c = model_.conf_head(st.h.data(), ws_);
      LocalPrediction p;
      p.t_ns = t_ns;
      p.center_x = lattice_.center_x(ix);
      p.center_y = lattice_.center_y(iy);
      p.u = static_cast<float>(flow[0]);
      p.v = static_cast<float>(flow[1]);
      p.confidence = static_cast<float>(c);
      p.event_count = st.event_count;
      out.push_back(p);
    }
  }
  if (t_ns > t_done_) t_done_ = t_ns;
}

template <typename T>
void StreamProcessor<T>::process(std::span<const Event> events,
                                 std::span<const TimeNs> query_times,
                                 std::vector<LocalPrediction>& out) {
  std::size_t ei = 0;
  for (TimeNs q : query_times) {
    while (ei < events.size() && events[ei].t_ns <= q) update(events[ei++]);
    query_all(q, out);
  }
  while (ei < events.size()) update(events[ei++]);
}

template <typename T>
std::vector<LocalPrediction> process_stream(const EstimatorModel<T>& model,
                                            const GridLattice& lattice,
                                            std::span<const Event> events,
                                            std::span<const TimeNs> query_times,
                                            const StreamOptions& opts) {
  StreamProcessor<T> proc(model, lattice, opts);
  std::vector<LocalPrediction> out;
  proc.process(events, query_times, out);
  return out;
}

namespace {
constexpr char kStateMagic[] = "STA1";
}

template <typename T>
void StreamProcessor<T>::save_state(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write state file " + path);
  write_magic(out, kStateMagic);
  write_le<std::uint8_t>(out, sizeof(T));
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(lattice_.width));
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(lattice_.height));
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(lattice_.k));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(lattice_.stride));
  write_le<double>(out, model_.hyper.alpha);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(model_.hyper.hidden));
  write_le<std::int64_t>(out, opts_.dt_ns);
  write_le<std::int64_t>(out, opts_.origin_ns);
  write_le<std::int64_t>(out, opts_.reset_every);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(opts_.min_events));
  write_le<std::int64_t>(out, slices_entered_);
  write_le<std::int64_t>(out, t_done_);
  std::vector<int> keys;
  keys.reserve(states_.size());
  for (const auto& [key, st] : states_) keys.push_back(key);
  std::sort(keys.begin(), keys.end());
  write_le<std::uint64_t>(out, keys.size());
  for (int key : keys) {
    const GridState<T>& st = states_.at(key);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(st.ix));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(st.iy));
    write_le<std::uint8_t>(out, st.started ? 1 : 0);
    write_le<std::int64_t>(out, st.t_prev_ns);
    write_le<std::uint64_t>(out, st.event_count);
    out.write(reinterpret_cast<const char*>(st.h.data()),
              static_cast<std::streamsize>(st.h.size() * sizeof(T)));
  }
}

template <typename T>
void StreamProcessor<T>::load_state(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open state file " + path);
  expect_magic(in, kStateMagic);
  const auto width = read_le<std::uint8_t>(in, "scalar width");
  if (width != sizeof(T)) throw DataError("state scalar width mismatch");
  const int w = read_le<std::uint16_t>(in, "width");
  const int h = read_le<std::uint16_t>(in, "height");
  const int k = read_le<std::uint16_t>(in, "k");
  const int stride = static_cast<int>(read_le<std::uint32_t>(in, "stride"));
  const double alpha = read_le<double>(in, "alpha");
  const int hidden = static_cast<int>(read_le<std::uint32_t>(in, "hidden"));
  if (w != lattice_.width || h != lattice_.height || k != lattice_.k ||
      stride != lattice_.stride)
    throw DataError("state lattice does not match the current run");
  if (alpha != model_.hyper.alpha || hidden != model_.hyper.hidden)
    throw DataError("state hyperparameters do not match the checkpoint");
  opts_.dt_ns = read_le<std::int64_t>(in, "dt");
  opts_.origin_ns = read_le<std::int64_t>(in, "origin");
  opts_.reset_every = read_le<std::int64_t>(in, "reset");
  opts_.min_events = static_cast<int>(read_le<std::uint32_t>(in, "min_events"));
  slices_entered_ = read_le<std::int64_t>(in, "slices_entered");
  t_done_ = read_le<std::int64_t>(in, "t_done");
  const auto count = read_le<std::uint64_t>(in, "state count");
  states_.clear();
  for (std::uint64_t i = 0; i < count; ++i) {
    GridState<T> st;
    st.ix = static_cast<int>(read_le<std::uint32_t>(in, "ix"));
    st.iy = static_cast<int>(read_le<std::uint32_t>(in, "iy"));
    st.started = read_le<std::uint8_t>(in, "started") != 0;
    st.t_prev_ns = read_le<std::int64_t>(in, "t_prev");
    st.event_count = read_le<std::uint64_t>(in, "event_count");
    st.h.resize(static_cast<std::size_t>(hidden));
    in.read(reinterpret_cast<char*>(st.h.data()),
            static_cast<std::streamsize>(st.h.size() * sizeof(T)));
    if (!in) throw DataError("truncated state file");
    states_.emplace(lattice_.grid_index(st.ix, st.iy), std::move(st));
  }
}

void write_predictions_binary(std::ostream& out, const std::vector<LocalPrediction>& preds,
                              int width, int height, TimeNs origin_ns) {
  write_magic(out, "LPR1");
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(width));
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(height));
  write_le<std::uint64_t>(out, preds.size());
  for (const LocalPrediction& p : preds) {
    write_le<std::uint64_t>(out, static_cast<std::uint64_t>(p.t_ns - origin_ns));
    write_le<std::uint16_t>(out, static_cast<std::uint16_t>(p.center_x));
    write_le<std::uint16_t>(out, static_cast<std::uint16_t>(p.center_y));
    write_le<float>(out, p.u);
    write_le<float>(out, p.v);
    write_le<float>(out, p.confidence);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(
                                     std::min<std::uint64_t>(p.event_count, 0xffffffffULL)));
  }
}

void write_predictions_text(std::ostream& out, const std::vector<LocalPrediction>& preds,
                            int width, int height, TimeNs origin_ns) {
  out << "# lpr1 width=" << width << " height=" << height << "\n";
  char buf[160];
  for (const LocalPrediction& p : preds) {
    std::snprintf(buf, sizeof(buf), "%.9f %d %d %.9g %.9g %.9g %llu\n",
                  ns_to_seconds(p.t_ns - origin_ns), p.center_x, p.center_y,
                  double(p.u), double(p.v), double(p.confidence),
                  static_cast<unsigned long long>(p.event_count));
    out << buf;
  }
}

void write_predictions_file(const std::string& path, const std::vector<LocalPrediction>& preds,
                            int width, int height, TimeNs origin_ns, bool binary) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write prediction file " + path);
  if (binary)
    write_predictions_binary(out, preds, width, height, origin_ns);
  else
    write_predictions_text(out, preds, width, height, origin_ns);
}

std::vector<LocalPrediction> read_predictions_file(const std::string& path, int* width,
                                                   int* height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open prediction file " + path);
  std::vector<LocalPrediction> preds;
  if (in.peek() == '#') {
    std::string line;
    std::getline(in, line);
    int w = 0, h = 0;
    if (std::sscanf(line.c_str(), "# lpr1 width=%d height=%d", &w, &h) != 2)
      throw DataError("bad LPR1 text header in " + path);
    if (width) *width = w;
    if (height) *height = h;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      double t, u, v, c;
      int xc, yc;
      unsigned long long n;
      if (std::sscanf(line.c_str(), "%lf %d %d %lf %lf %lf %llu", &t, &xc, &yc, &u, &v,
                      &c, &n) != 7)
        throw DataError("bad LPR1 text record: " + line);
      preds.push_back(LocalPrediction{seconds_to_ns(t), xc, yc, float(u), float(v),
                                      float(c), n});
    }
    return preds;
  }
  expect_magic(in, "LPR1");
  const int w = read_le<std::uint16_t>(in, "width");
  const int h = read_le<std::uint16_t>(in, "height");
  if (width) *width = w;
  if (height) *height = h;
  const auto count = read_le<std::uint64_t>(in, "count");
  preds.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    LocalPrediction p;
    p.t_ns = static_cast<TimeNs>(read_le<std::uint64_t>(in, "t"));
    p.center_x = read_le<std::uint16_t>(in, "xc");
    p.center_y = read_le<std::uint16_t>(in, "yc");
    p.u = read_le<float>(in, "u");
    p.v = read_le<float>(in, "v");
    p.confidence = read_le<float>(in, "c");
    p.event_count = read_le<std::uint32_t>(in, "event_count");
    preds.push_back(p);
  }
  return preds;
}

template struct EstimatorModel<float>;
template struct EstimatorModel<double>;
template class StreamProcessor<float>;
template class StreamProcessor<double>;

}  // namespace evflow
