#ifndef BAIM_TYPES_HPP
#define BAIM_TYPES_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace baim {

// Build-wide precision flag. Verification builds use fp64 (default);
// define BAIM_PRECISION_FP32 to run experiments in fp32.
#if defined(BAIM_PRECISION_FP32)
using real = float;
inline constexpr const char* kPrecisionName = "fp32";
#else
using real = double;
inline constexpr const char* kPrecisionName = "fp64";
#endif

inline constexpr std::uint32_t kContainerVersion = 1;

struct error : std::runtime_error {
  explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape disagreement between tensors/operands.
struct dim_error : error {
  explicit dim_error(const std::string& msg) : error(msg) {}
};

// NaN/Inf values, domain violations, failed numeric checks.
struct numeric_error : error {
  explicit numeric_error(const std::string& msg) : error(msg) {}
};

// Invalid specs, configs, ranges, duplicate ids.
struct config_error : error {
  explicit config_error(const std::string& msg) : error(msg) {}
};

// Malformed model containers.
struct format_error : error {
  explicit format_error(const std::string& msg) : error(msg) {}
};

// Tape misuse (backward on a spent tape, non-scalar loss).
struct tape_error : error {
  explicit tape_error(const std::string& msg) : error(msg) {}
};

}  // namespace baim

#endif  // BAIM_TYPES_HPP
