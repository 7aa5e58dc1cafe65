#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "evflow/common.hpp"

namespace evflow {

// One asynchronous sensor sample. Timestamps are integer nanoseconds
// internally; seconds appear only at the text-format boundary and inside
// the embedding.
struct Event {
  TimeNs t_ns = 0;
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::int8_t p = 1;  // polarity, -1 or +1
};

struct StreamHeader {
  int width = 0;
  int height = 0;
  TimeNs t_min_ns = 0;
  TimeNs t_max_ns = 0;
};

struct EventStream {
  StreamHeader header;
  std::vector<Event> events;
  // Count of input records that arrived with a timestamp earlier than a
  // predecessor; the stream itself is always re-sorted (stable).
  std::uint64_t reorder_warnings = 0;

  std::size_t size() const { return events.size(); }
  bool empty() const { return events.empty(); }
};

enum class EventFormat { text, binary };

// Text format: header "# ev1 width=<W> height=<H>", then "t_seconds x y p".
// Binary format "EVB1": magic, u16 width, u16 height, u64 count, then per
// event u64 t_ns, u16 x, u16 y, i8 p, u8 pad. Little-endian throughout.
EventStream parse_events(std::istream& in, EventFormat format);
EventStream read_events_file(const std::string& path);  // sniffs the magic
void write_events_text(std::ostream& out, const EventStream& stream);
void write_events_binary(std::ostream& out, const EventStream& stream);
void write_events_file(const std::string& path, const EventStream& stream,
                       EventFormat format = EventFormat::binary);

// Regular lattice of K x K windows clamped so every window fits inside the
// sensor. With stride < K windows overlap and one event can belong to
// several grids.
struct GridLattice {
  int k = 15;      // odd window side
  int stride = 1;  // >= 1
  int width = 0;
  int height = 0;

  GridLattice() = default;
  GridLattice(int k_, int stride_, int width_, int height_);

  int half() const { return (k - 1) / 2; }
  int cols = 0;  // centers along x
  int rows = 0;  // centers along y
  int num_grids() const { return cols * rows; }

  int center_x(int ix) const { return half() + ix * stride; }
  int center_y(int iy) const { return half() + iy * stride; }
  int grid_index(int ix, int iy) const { return iy * cols + ix; }

  // Inclusive index range of centers whose window contains pixel x (resp. y).
  std::pair<int, int> covering_range_x(int x) const;
  std::pair<int, int> covering_range_y(int y) const;

  bool contains(int ix, int iy, int x, int y) const {
    return std::abs(x - center_x(ix)) <= half() && std::abs(y - center_y(iy)) <= half();
  }
};

// 4-vector fed to the recurrent cell: normalized offsets, scaled inter-event
// interval, polarity.
struct LocalEmbedding {
  double nx = 0, ny = 0, dt_scaled = 0, p = 0;
  std::array<double, 4> as_array() const { return {nx, ny, dt_scaled, p}; }
};

// (2(x-xc)/K, 2(y-yc)/K, (t - t_prev) * alpha, p). For a grid's first event
// pass t_prev_ns == e.t_ns so the temporal term is zero.
LocalEmbedding embed_event(const Event& e, int center_x, int center_y, int k,
                           double alpha, TimeNs t_prev_ns);

// Per-grid time-ordered event index lists. Grids with no events get empty
// lists; relative order within a grid follows the stream.
std::vector<std::vector<std::uint32_t>> partition_to_grids(const EventStream& stream,
                                                           const GridLattice& lattice);

// Half-open supervision interval [t_start, t_start + dt).
struct TimeSlice {
  TimeNs t_start_ns = 0;
  TimeNs t_end_ns = 0;
  std::uint32_t first = 0;  // index range into the parent stream
  std::uint32_t last = 0;   // one past the end
};

// Contiguous slices [origin + n*dt, origin + (n+1)*dt) covering the whole
// stream. Events exactly at a slice end belong to the next slice.
std::vector<TimeSlice> slice_stream(const EventStream& stream, TimeNs dt_ns,
                                    TimeNs origin_ns);

inline int slice_of(TimeNs t_ns, TimeNs origin_ns, TimeNs dt_ns) {
  return static_cast<int>((t_ns - origin_ns) / dt_ns);
}

}  // namespace evflow
