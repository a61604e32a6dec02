#include "mb/canonical.hpp"

#include <charconv>

namespace mb {

namespace {

void append(Bytes& out, std::string_view s) {
  out.insert(out.end(), s.begin(), s.end());
}

void append_len_prefixed(Bytes& out, std::span<const std::uint8_t> value) {
  char buf[24];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), value.size());
  append(out, std::string_view(buf, static_cast<std::size_t>(p - buf)));
  out.push_back(':');
  out.insert(out.end(), value.begin(), value.end());
}

std::string to_decimal(std::int64_t v) {
  char buf[24];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, static_cast<std::size_t>(p - buf));
}

}  // namespace

void CanonicalWriter::raw_field(std::string_view tag, std::span<const std::uint8_t> value) {
  append(out_, tag);
  out_.push_back('=');
  append_len_prefixed(out_, value);
  out_.push_back(';');
}

CanonicalWriter& CanonicalWriter::field(std::string_view tag, std::string_view value) {
  raw_field(tag, {reinterpret_cast<const std::uint8_t*>(value.data()), value.size()});
  return *this;
}

CanonicalWriter& CanonicalWriter::field(std::string_view tag, std::span<const std::uint8_t> value) {
  raw_field(tag, value);
  return *this;
}

CanonicalWriter& CanonicalWriter::field(std::string_view tag, std::int64_t value) {
  return field(tag, std::string_view(to_decimal(value)));
}

CanonicalWriter& CanonicalWriter::field(std::string_view tag, bool value) {
  return field(tag, std::string_view(value ? "1" : "0"));
}

CanonicalWriter& CanonicalWriter::list(std::string_view tag, std::span<const std::string> values) {
  Bytes payload;
  for (const std::string& v : values) {
    append_len_prefixed(payload, {reinterpret_cast<const std::uint8_t*>(v.data()), v.size()});
    payload.push_back(',');
  }
  raw_field(tag, payload);
  return *this;
}

CanonicalWriter& CanonicalWriter::nested(std::string_view tag, const CanonicalWriter& inner) {
  raw_field(tag, inner.bytes());
  return *this;
}

}  // namespace mb
