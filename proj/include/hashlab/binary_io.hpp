// Copyright 2026 The hashlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Little-endian primitive readers/writers shared by the on-disk formats.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "hashlab/errors.hpp"

namespace hashlab::io {

template <class T>
  requires std::is_arithmetic_v<T>
void write_le(std::ostream& os, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                  std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
  U bits;
  std::memcpy(&bits, &value, sizeof(T));
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
  requires std::is_arithmetic_v<T>
T read_le(std::istream& is, const std::string& what) {
  unsigned char buf[sizeof(T)];
  const auto at = static_cast<long long>(is.tellg());
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T)))
    throw DataError("truncated file reading " + what + " at byte offset " + std::to_string(at));
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                  std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<U>(static_cast<U>(buf[i]) << (8 * i));
  T value;
  std::memcpy(&value, &bits, sizeof(T));
  return value;
}

inline void expect_magic(std::istream& is, const char (&magic)[5], const std::string& path) {
  char got[4] = {};
  if (!is.read(got, 4) || std::memcmp(got, magic, 4) != 0)
    throw DataError(path + ": bad magic, expected \"" + std::string(magic, 4) + "\"");
}

}  // namespace hashlab::io
