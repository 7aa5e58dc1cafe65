#include "evflow/events.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "evflow/binio.hpp"

namespace evflow {

namespace {

void validate_event(const Event& e, const StreamHeader& h, std::size_t record) {
  if (int(e.x) >= h.width || int(e.y) >= h.height)
    throw DataError("event " + std::to_string(record) + " out of bounds: (" +
                    std::to_string(e.x) + "," + std::to_string(e.y) + ") on " +
                    std::to_string(h.width) + "x" + std::to_string(h.height));
  if (e.p != 1 && e.p != -1)
    throw DataError("event " + std::to_string(record) +
                    " has polarity " + std::to_string(e.p) + ", want -1 or +1");
}

void finalize_stream(EventStream& s) {
  for (std::size_t i = 1; i < s.events.size(); ++i)
    if (s.events[i].t_ns < s.events[i - 1].t_ns) ++s.reorder_warnings;
  if (s.reorder_warnings > 0)
    std::stable_sort(s.events.begin(), s.events.end(),
                     [](const Event& a, const Event& b) { return a.t_ns < b.t_ns; });
  if (!s.events.empty()) {
    s.header.t_min_ns = s.events.front().t_ns;
    s.header.t_max_ns = s.events.back().t_ns;
  }
}

EventStream parse_text(std::istream& in) {
  EventStream s;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      int w = 0, h = 0;
      if (std::sscanf(line.c_str(), "# ev1 width=%d height=%d", &w, &h) != 2)
        throw DataError("line " + std::to_string(lineno) + ": bad header '" + line + "'");
      s.header.width = w;
      s.header.height = h;
      have_header = true;
      continue;
    }
    if (!have_header)
      throw DataError("line " + std::to_string(lineno) + ": event before '# ev1' header");
    double t = 0;
    long x = 0, y = 0, p = 0;
    std::istringstream fields(line);
    if (!(fields >> t >> x >> y >> p))
      throw DataError("line " + std::to_string(lineno) + ": malformed record '" + line + "'");
    Event e;
    e.t_ns = seconds_to_ns(t);
    if (x < 0 || y < 0 || x > 0xffff || y > 0xffff)
      throw DataError("line " + std::to_string(lineno) + ": coordinate out of range");
    e.x = static_cast<std::uint16_t>(x);
    e.y = static_cast<std::uint16_t>(y);
    e.p = static_cast<std::int8_t>(p);
    validate_event(e, s.header, lineno);
    s.events.push_back(e);
  }
  if (!have_header) throw DataError("missing '# ev1' header");
  finalize_stream(s);
  return s;
}

EventStream parse_binary(std::istream& in) {
  expect_magic(in, "EVB1");
  EventStream s;
  s.header.width = read_le<std::uint16_t>(in, "width");
  s.header.height = read_le<std::uint16_t>(in, "height");
  const auto count = read_le<std::uint64_t>(in, "count");
  s.events.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    Event e;
    e.t_ns = static_cast<TimeNs>(read_le<std::uint64_t>(in, "t"));
    e.x = read_le<std::uint16_t>(in, "x");
    e.y = read_le<std::uint16_t>(in, "y");
    e.p = read_le<std::int8_t>(in, "p");
    read_le<std::uint8_t>(in, "pad");
    validate_event(e, s.header, i);
    s.events.push_back(e);
  }
  finalize_stream(s);
  return s;
}

}  // namespace

EventStream parse_events(std::istream& in, EventFormat format) {
  return format == EventFormat::text ? parse_text(in) : parse_binary(in);
}

EventStream read_events_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open event file " + path);
  char c = static_cast<char>(in.peek());
  return parse_events(in, c == 'E' ? EventFormat::binary : EventFormat::text);
}

void write_events_text(std::ostream& out, const EventStream& s) {
  out << "# ev1 width=" << s.header.width << " height=" << s.header.height << "\n";
  char buf[96];
  for (const Event& e : s.events) {
    std::snprintf(buf, sizeof(buf), "%.9f %u %u %d\n", ns_to_seconds(e.t_ns),
                  unsigned(e.x), unsigned(e.y), int(e.p));
    out << buf;
  }
}

void write_events_binary(std::ostream& out, const EventStream& s) {
  write_magic(out, "EVB1");
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(s.header.width));
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(s.header.height));
  write_le<std::uint64_t>(out, s.events.size());
  for (const Event& e : s.events) {
    write_le<std::uint64_t>(out, static_cast<std::uint64_t>(e.t_ns));
    write_le<std::uint16_t>(out, e.x);
    write_le<std::uint16_t>(out, e.y);
    write_le<std::int8_t>(out, e.p);
    write_le<std::uint8_t>(out, 0);
  }
}

void write_events_file(const std::string& path, const EventStream& s, EventFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write event file " + path);
  if (format == EventFormat::binary)
    write_events_binary(out, s);
  else
    write_events_text(out, s);
}

GridLattice::GridLattice(int k_, int stride_, int width_, int height_)
    : k(k_), stride(stride_), width(width_), height(height_) {
  if (k < 1 || k % 2 == 0) throw ConfigError("grid K must be odd and positive");
  if (stride < 1) throw ConfigError("grid stride must be >= 1");
  if (width < k || height < k)
    throw ConfigError("sensor smaller than one K x K window");
  cols = (width - k) / stride + 1;
  rows = (height - k) / stride + 1;
}

std::pair<int, int> GridLattice::covering_range_x(int x) const {
  // centers c = half + i*stride with |x - c| <= half
  const int lo_num = x - 2 * half();  // c >= x - half  ->  i >= (x - 2*half)/stride
  int lo = lo_num <= 0 ? 0 : (lo_num + stride - 1) / stride;
  int hi = x / stride;  // c <= x + half  ->  i <= x/stride
  if (hi >= cols) hi = cols - 1;
  return {lo, hi};
}

std::pair<int, int> GridLattice::covering_range_y(int y) const {
  const int lo_num = y - 2 * half();
  int lo = lo_num <= 0 ? 0 : (lo_num + stride - 1) / stride;
  int hi = y / stride;
  if (hi >= rows) hi = rows - 1;
  return {lo, hi};
}

LocalEmbedding embed_event(const Event& e, int center_x, int center_y, int k,
                           double alpha, TimeNs t_prev_ns) {
  const int dx = int(e.x) - center_x;
  const int dy = int(e.y) - center_y;
  const int half = (k - 1) / 2;
  if (std::abs(dx) > half || std::abs(dy) > half)
    throw ContractError("embed_event: event outside the K x K window");
  if (e.t_ns < t_prev_ns) throw ContractError("embed_event: time regression");
  LocalEmbedding emb;
  emb.nx = 2.0 * dx / k;
  emb.ny = 2.0 * dy / k;
  emb.dt_scaled = ns_to_seconds(e.t_ns - t_prev_ns) * alpha;
  emb.p = static_cast<double>(e.p);
  return emb;
}

std::vector<std::vector<std::uint32_t>> partition_to_grids(const EventStream& stream,
                                                           const GridLattice& lat) {
  std::vector<std::vector<std::uint32_t>> grids(
      static_cast<std::size_t>(lat.num_grids()));
  for (std::uint32_t i = 0; i < stream.events.size(); ++i) {
    const Event& e = stream.events[i];
    const auto [x0, x1] = lat.covering_range_x(e.x);
    const auto [y0, y1] = lat.covering_range_y(e.y);
    for (int iy = y0; iy <= y1; ++iy)
      for (int ix = x0; ix <= x1; ++ix)
        grids[static_cast<std::size_t>(lat.grid_index(ix, iy))].push_back(i);
  }
  return grids;
}

std::vector<TimeSlice> slice_stream(const EventStream& stream, TimeNs dt_ns,
                                    TimeNs origin_ns) {
  if (dt_ns <= 0) throw ConfigError("slice interval must be positive");
  std::vector<TimeSlice> slices;
  if (stream.empty()) return slices;
  if (stream.header.t_min_ns < origin_ns)
    throw ContractError("slice_stream: events before the slicing origin");
  const int last = slice_of(stream.header.t_max_ns, origin_ns, dt_ns);
  slices.resize(static_cast<std::size_t>(last) + 1);
  const auto& ev = stream.events;
  for (int n = 0; n <= last; ++n) {
    TimeSlice& s = slices[static_cast<std::size_t>(n)];
    s.t_start_ns = origin_ns + n * dt_ns;
    s.t_end_ns = s.t_start_ns + dt_ns;
    const auto lo = std::lower_bound(ev.begin(), ev.end(), s.t_start_ns,
                                     [](const Event& e, TimeNs t) { return e.t_ns < t; });
    const auto hi = std::lower_bound(ev.begin(), ev.end(), s.t_end_ns,
                                     [](const Event& e, TimeNs t) { return e.t_ns < t; });
    s.first = static_cast<std::uint32_t>(lo - ev.begin());
    s.last = static_cast<std::uint32_t>(hi - ev.begin());
  }
  return slices;
}

}  // namespace evflow
