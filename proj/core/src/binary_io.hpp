#ifndef KEYMOTION_SRC_BINARY_IO_HPP_
#define KEYMOTION_SRC_BINARY_IO_HPP_

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include "keymotion/common.hpp"

namespace keymotion::binary {

// Host byte order; both containers are documented as little-endian and the
// supported targets are little-endian.
template <typename T>
void Put(std::ostream& out, const T& value) {
  static_assert(std::is_trivially_copyable_v<T>);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T Get(std::istream& in, const std::string& what) {
  static_assert(std::is_trivially_copyable_v<T>);
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T))) {
    throw IoError("truncated file while reading " + what);
  }
  return value;
}

inline void PutString(std::ostream& out, const std::string& s) {
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string GetString(std::istream& in, const std::string& what) {
  const auto size = Get<std::uint32_t>(in, what);
  if (size > (1u << 20)) throw IoError("implausible string length while reading " + what);
  std::string s(size, '\0');
  in.read(s.data(), size);
  if (in.gcount() != static_cast<std::streamsize>(size)) throw IoError("truncated file while reading " + what);
  return s;
}

inline void PutVector(std::ostream& out, const Vector& v) {
  Put<std::uint32_t>(out, static_cast<std::uint32_t>(v.size()));
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(sizeof(double) * v.size()));
}

inline Vector GetVector(std::istream& in, const std::string& what, std::uint32_t max_size = 1u << 26) {
  const auto size = Get<std::uint32_t>(in, what);
  if (size > max_size) throw IoError("implausible vector length while reading " + what);
  Vector v(size);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(sizeof(double) * size));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(double) * size)) {
    throw IoError("truncated file while reading " + what);
  }
  return v;
}

}  // namespace keymotion::binary

#endif  // KEYMOTION_SRC_BINARY_IO_HPP_
