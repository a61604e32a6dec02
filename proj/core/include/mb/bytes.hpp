#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mb {

using Bytes = std::vector<std::uint8_t>;
using Digest = std::array<std::uint8_t, 32>;

// Keys, digests and signatures render as lowercase hex everywhere.
std::string to_hex(std::span<const std::uint8_t> bytes);
Bytes from_hex(std::string_view hex);  // throws Error on odd length / non-hex chars

inline Bytes to_bytes(std::string_view s) {
  return Bytes(s.begin(), s.end());
}

inline std::span<const std::uint8_t> as_span(const Digest& d) {
  return {d.data(), d.size()};
}

}  // namespace mb
