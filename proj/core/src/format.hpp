#pragma once

#include <array>
#include <charconv>
#include <string>

namespace diffnet::detail {

// Locale-independent shortest form that still round-trips at 17 digits.
inline std::string format_double(double value) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value,
                                 std::chars_format::general, 17);
  return std::string(buf.data(), ptr);
}

}  // namespace diffnet::detail
