#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

// Little-endian encoding helpers shared by the checkpoint and dataset formats.
namespace msfin::binio {

template <typename U>
U to_little(U v) {
  static_assert(std::is_unsigned_v<U>);
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    U r = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) r = static_cast<U>((r << 8) | ((v >> (8 * i)) & 0xFF));
    return r;
  }
}

template <typename U>
void put(std::ostream& os, U v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

inline void put_f32(std::ostream& os, float f) { put(os, std::bit_cast<std::uint32_t>(f)); }
inline void put_f64(std::ostream& os, double f) { put(os, std::bit_cast<std::uint64_t>(f)); }

inline void put_bytes(std::ostream& os, const std::string& s) {
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

/// Returns false on short read.
template <typename U>
bool get(std::istream& is, U& v) {
  U raw{};
  if (!is.read(reinterpret_cast<char*>(&raw), sizeof(U))) return false;
  v = to_little(raw);
  return true;
}

inline bool get_f32(std::istream& is, float& f) {
  std::uint32_t u;
  if (!get(is, u)) return false;
  f = std::bit_cast<float>(u);
  return true;
}

inline bool get_f64(std::istream& is, double& f) {
  std::uint64_t u;
  if (!get(is, u)) return false;
  f = std::bit_cast<double>(u);
  return true;
}

inline bool get_bytes(std::istream& is, std::string& s, std::size_t n) {
  s.resize(n);
  return n == 0 || static_cast<bool>(is.read(s.data(), static_cast<std::streamsize>(n)));
}

}  // namespace msfin::binio
