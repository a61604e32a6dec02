#pragma once

// Deterministic key pairs, detached signatures, content digests and
// verifiable-credential wrappers. Everything here is reproducible from
// 32-byte seeds; there is no ambient randomness.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mb/bytes.hpp"

namespace mb {

inline constexpr std::size_t kSeedSize = 32;

struct KeyPair {
  std::string key_id;
  Bytes public_part;  // 32 bytes
  Bytes secret_part;  // 64 bytes; never leaves the credential vault or the user device

  bool operator==(const KeyPair&) const = default;
};

struct Signature {
  std::string signer_key_id;
  Digest payload_digest{};
  Bytes sig_bytes;

  bool operator==(const Signature&) const = default;
};

struct VerifiableCredential {
  std::string subject;
  std::vector<std::pair<std::string, std::string>> claims;  // ordered, unique keys
  std::int64_t valid_from = 0;
  std::int64_t valid_until = 0;
  Signature issuer_signature;
};

// Equal seeds yield byte-identical key pairs. Throws SeedError unless the
// seed is exactly 32 bytes.
KeyPair keygen(std::span<const std::uint8_t> seed);

// SHA-256 of the payload.
Digest digest(std::span<const std::uint8_t> payload);
Digest digest(std::string_view payload);

// Detached signature over the payload. Throws SigningError when kp holds no
// secret part. Deterministic: same payload + key gives identical bytes.
Signature sign(std::span<const std::uint8_t> payload, const KeyPair& kp);

// Accept iff sig was produced by the matching secret over exactly this
// payload. Reject is a value, not an error.
bool verify(std::span<const std::uint8_t> payload, const Signature& sig,
            std::span<const std::uint8_t> public_part);

// Credential wrapper: issuer signs the canonical encoding of subject,
// claims and validity window.
VerifiableCredential issue_credential(std::string subject,
                                      std::vector<std::pair<std::string, std::string>> claims,
                                      std::int64_t valid_from, std::int64_t valid_until,
                                      const KeyPair& issuer);

// Verification fails outside [valid_from, valid_until].
bool verify_credential(const VerifiableCredential& vc,
                       std::span<const std::uint8_t> issuer_public, std::int64_t now);

// Canonical bytes a credential signature covers (signature field excluded).
Bytes credential_signing_bytes(const VerifiableCredential& vc);

}  // namespace mb
