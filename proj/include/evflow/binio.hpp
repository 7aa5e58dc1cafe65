#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "evflow/common.hpp"

namespace evflow {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts unsupported");

template <typename T>
void write_le(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::istream& in, const char* what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError(std::string("unexpected end of file reading ") + what);
  return v;
}

inline void write_magic(std::ostream& out, const char* magic) {
  out.write(magic, static_cast<std::streamsize>(std::strlen(magic)));
}

inline void expect_magic(std::istream& in, const char* magic) {
  const std::size_t n = std::strlen(magic);
  std::string got(n, '\0');
  in.read(got.data(), static_cast<std::streamsize>(n));
  if (!in || got != magic)
    throw DataError(std::string("bad magic, expected ") + magic + " got '" + got + "'");
}

inline void write_str(std::ostream& out, const std::string& s) {
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_str(std::istream& in) {
  const auto n = read_le<std::uint16_t>(in, "string length");
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw DataError("unexpected end of file reading string");
  return s;
}

}  // namespace evflow
