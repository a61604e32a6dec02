#pragma once

// Reference SHA-256 used as an independent oracle for the digest tests.
// Deliberately separate from the implementation under test.

#include <array>
#include <cstdint>
#include <span>

namespace mbtest {

std::array<std::uint8_t, 32> sha256_ref(std::span<const std::uint8_t> data);

}  // namespace mbtest
