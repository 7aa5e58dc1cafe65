#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace evflow {

// Exit codes used by the CLI; library code throws the matching exception type.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitDataError = 3;
inline constexpr int kExitNumericError = 4;

// Bad configuration: unknown keys, invalid values, incompatible flags.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or inconsistent input data (parse failures, bound violations,
// format mismatches).
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric failure during optimization (NaN loss abort).
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Violated internal contract (programming error rather than bad input).
struct ContractError : std::logic_error {
  explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractError(msg);
}

using TimeNs = std::int64_t;

inline constexpr double kNsPerSec = 1e9;

inline TimeNs seconds_to_ns(double seconds) {
  return static_cast<TimeNs>(std::llround(seconds * kNsPerSec));
}

inline double ns_to_seconds(TimeNs ns) { return static_cast<double>(ns) / kNsPerSec; }

}  // namespace evflow
