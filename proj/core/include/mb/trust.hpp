#pragma once

#include <string_view>

namespace mb {

// Per-field marker separating instruction channels from content channels.
// Untrusted tags survive every hop; no runtime operation may clear one.
enum class Trust { Trusted, Untrusted };

inline std::string_view to_string(Trust t) {
  return t == Trust::Trusted ? "trusted" : "untrusted";
}

}  // namespace mb
