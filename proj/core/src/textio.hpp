#pragma once

#include <charconv>
#include <cstdint>
#include <string>

namespace coopcart::detail {

// Shortest round-trip decimal representation; locale-independent, so text
// artifacts are byte-stable across runs.
inline std::string to_text(double value) {
  char buffer[40];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

inline std::string to_text(std::uint64_t value) { return std::to_string(value); }
inline std::string to_text(std::int64_t value) { return std::to_string(value); }
inline std::string to_text(int value) { return std::to_string(value); }

}  // namespace coopcart::detail
