#pragma once

// Canonical record encoding used for every signed payload. Deterministic and
// injective: fields are length-prefixed (`tag=<len>:<bytes>;`), emitted in a
// fixed tag order by each caller, and the signature field is never included
// in the bytes it signs.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mb/bytes.hpp"

namespace mb {

class CanonicalWriter {
 public:
  CanonicalWriter& field(std::string_view tag, std::string_view value);
  CanonicalWriter& field(std::string_view tag, std::span<const std::uint8_t> value);
  CanonicalWriter& field(std::string_view tag, std::int64_t value);
  CanonicalWriter& field(std::string_view tag, bool value);

  // List payload: each element length-prefixed (`<len>:<bytes>,`), order
  // preserved as given.
  CanonicalWriter& list(std::string_view tag, std::span<const std::string> values);

  // Nested record: the inner writer's bytes become one length-prefixed field.
  CanonicalWriter& nested(std::string_view tag, const CanonicalWriter& inner);

  const Bytes& bytes() const { return out_; }
  Bytes take() { return std::move(out_); }

 private:
  void raw_field(std::string_view tag, std::span<const std::uint8_t> value);
  Bytes out_;
};

}  // namespace mb
