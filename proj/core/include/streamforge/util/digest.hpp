#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace streamforge::util {

/// FNV-1a 64-bit hash of a byte string.
inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t hash = 1469598103934665603ull;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

/// 16-character lowercase hex rendering, used for candidate and fixture ids.
inline std::string hex_digest(std::string_view text) {
  static const char* digits = "0123456789abcdef";
  std::uint64_t h = fnv1a64(text);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xF];
    h >>= 4;
  }
  return out;
}

}  // namespace streamforge::util
