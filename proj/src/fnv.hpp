#pragma once

#include <cstdint>
#include <string_view>

namespace spectraforge {

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;

/// FNV-1a, 64 bit. Chain calls by passing the previous value as `hash`.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t hash = kFnvOffset) {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

inline std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t hash = kFnvOffset) {
  return fnv1a64(std::string_view(static_cast<const char*>(data), size), hash);
}

}  // namespace spectraforge
