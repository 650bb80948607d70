#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "knobtune/errors.hpp"

// Little-endian primitives for the checkpoint format. Doubles travel as
// their IEEE-754 bit pattern, so round trips are bit-exact.

namespace knobtune::binio {

inline void write_u8(std::ostream& os, std::uint8_t v) {
  os.put(static_cast<char>(v));
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(buf, 8);
}

inline void write_f64(std::ostream& os, double v) {
  write_u64(os, std::bit_cast<std::uint64_t>(v));
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void write_f64_vec(std::ostream& os, const std::vector<double>& v) {
  write_u64(os, v.size());
  for (double x : v) write_f64(os, x);
}

inline std::uint8_t read_u8(std::istream& is) {
  int c = is.get();
  if (c == std::istream::traits_type::eof()) throw CheckpointError("unexpected end of file");
  return static_cast<std::uint8_t>(c);
}

inline std::uint64_t read_u64(std::istream& is) {
  char buf[8];
  is.read(buf, 8);
  if (is.gcount() != 8) throw CheckpointError("unexpected end of file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf[i])) << (8 * i);
  return v;
}

inline double read_f64(std::istream& is) {
  return std::bit_cast<double>(read_u64(is));
}

inline std::string read_string(std::istream& is, std::uint64_t max_len = (1ull << 30)) {
  std::uint64_t n = read_u64(is);
  if (n > max_len) throw CheckpointError("string length out of range");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (static_cast<std::uint64_t>(is.gcount()) != n) throw CheckpointError("unexpected end of file");
  return s;
}

inline std::vector<double> read_f64_vec(std::istream& is, std::uint64_t max_len = (1ull << 28)) {
  std::uint64_t n = read_u64(is);
  if (n > max_len) throw CheckpointError("array length out of range");
  std::vector<double> v(n);
  for (auto& x : v) x = read_f64(is);
  return v;
}

}  // namespace knobtune::binio
