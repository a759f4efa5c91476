#pragma once

// Little-endian scalar helpers for the on-disk formats.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

namespace clidd::binary {

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

/// Returns false if the stream ran dry.
template <typename T>
bool read_le(std::istream& in, T& value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) return false;
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  std::memcpy(&value, bytes, sizeof(T));
  return true;
}

inline void write_floats(std::ostream& out, const float* data, std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data), std::streamsize(count * sizeof(float)));
  } else {
    for (std::size_t i = 0; i < count; ++i) write_le(out, data[i]);
  }
}

inline bool read_floats(std::istream& in, float* data, std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    return bool(in.read(reinterpret_cast<char*>(data), std::streamsize(count * sizeof(float))));
  } else {
    for (std::size_t i = 0; i < count; ++i)
      if (!read_le(in, data[i])) return false;
    return true;
  }
}

}  // namespace clidd::binary
