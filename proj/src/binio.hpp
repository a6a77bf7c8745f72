#pragma once

// Little-endian binary helpers shared by the dataset, checkpoint and PLY
// codecs.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "tfkit/common.hpp"

namespace tfkit::binio {

template <typename T>
void put(std::ostream& out, T value) {
  static_assert(std::is_arithmetic_v<T>);
  using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
      std::conditional_t<sizeof(T) == 2, std::uint16_t,
          std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
  auto bits = std::bit_cast<U>(value);
  char bytes[sizeof(T)];
  for (size_t i = 0; i < sizeof(T); i++) bytes[i] = char((bits >> (8 * i)) & 0xff);
  out.write(bytes, sizeof(T));
}

template <typename T>
T get(std::istream& in, const char* what) {
  static_assert(std::is_arithmetic_v<T>);
  using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
      std::conditional_t<sizeof(T) == 2, std::uint16_t,
          std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T)))
    throw InputError(std::string("truncated file while reading ") + what);
  U bits = 0;
  for (size_t i = 0; i < sizeof(T); i++) bits |= U(bytes[i]) << (8 * i);
  return std::bit_cast<T>(bits);
}

}  // namespace tfkit::binio
