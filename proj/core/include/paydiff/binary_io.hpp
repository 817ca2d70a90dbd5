#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "paydiff/common.hpp"

// Little-endian fixed-width helpers shared by the trajectory, dataset and
// checkpoint containers. The host is assumed little endian.
namespace paydiff::binio {

template <class T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::istream& in, const char* what) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T))) {
    throw FormatError(std::string("corrupt file: truncated while reading ") + what);
  }
  return value;
}

inline void put_bytes(std::ostream& out, const void* data, std::size_t n) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

inline void get_bytes(std::istream& in, void* data, std::size_t n, const char* what) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
  if (in.gcount() != static_cast<std::streamsize>(n)) {
    throw FormatError(std::string("corrupt file: truncated while reading ") + what);
  }
}

inline void put_string(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  put_bytes(out, s.data(), s.size());
}

inline std::string get_string(std::istream& in, const char* what, std::size_t max_len = std::size_t{1} << 30) {
  const auto n = get<std::uint64_t>(in, what);
  if (n > max_len) throw FormatError(std::string("corrupt file: implausible length for ") + what);
  std::string s(static_cast<std::size_t>(n), '\0');
  get_bytes(in, s.data(), s.size(), what);
  return s;
}

inline void put_magic(std::ostream& out, const char (&magic)[9]) { put_bytes(out, magic, 8); }

inline void expect_magic(std::istream& in, const char (&magic)[9], const char* what) {
  char buf[8];
  get_bytes(in, buf, 8, what);
  if (std::memcmp(buf, magic, 8) != 0) throw FormatError(std::string("not a ") + what + " file (bad magic)");
}

}  // namespace paydiff::binio
