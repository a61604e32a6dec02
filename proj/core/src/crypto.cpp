#include "mb/crypto.hpp"

#include <sodium.h>

#include <algorithm>
#include <mutex>
#include <set>

#include "mb/canonical.hpp"
#include "mb/errors.hpp"

namespace mb {

namespace {

void ensure_sodium() {
  static std::once_flag once;
  std::call_once(once, [] {
    if (sodium_init() < 0) {
      throw Error("libsodium initialization failed");
    }
  });
}

int hex_nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0x0f]);
  }
  return out;
}

Bytes from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) {
    throw Error("hex string has odd length");
  }
  Bytes out;
  out.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    int hi = hex_nibble(hex[i]);
    int lo = hex_nibble(hex[i + 1]);
    if (hi < 0 || lo < 0) {
      throw Error("hex string has non-hex character");
    }
    out.push_back(static_cast<std::uint8_t>((hi << 4) | lo));
  }
  return out;
}

KeyPair keygen(std::span<const std::uint8_t> seed) {
  ensure_sodium();
  if (seed.size() != kSeedSize) {
    throw SeedError("seed must be exactly 32 bytes, got " + std::to_string(seed.size()));
  }
  KeyPair kp;
  kp.public_part.resize(crypto_sign_PUBLICKEYBYTES);
  kp.secret_part.resize(crypto_sign_SECRETKEYBYTES);
  crypto_sign_seed_keypair(kp.public_part.data(), kp.secret_part.data(), seed.data());
  Digest pk_digest = digest(kp.public_part);
  kp.key_id = "k" + to_hex({pk_digest.data(), 8});
  return kp;
}

Digest digest(std::span<const std::uint8_t> payload) {
  ensure_sodium();
  Digest out{};
  crypto_hash_sha256(out.data(), payload.data(), payload.size());
  return out;
}

Digest digest(std::string_view payload) {
  return digest(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(payload.data()), payload.size()));
}

Signature sign(std::span<const std::uint8_t> payload, const KeyPair& kp) {
  ensure_sodium();
  if (kp.secret_part.size() != crypto_sign_SECRETKEYBYTES) {
    throw SigningError("key pair '" + kp.key_id + "' holds no usable secret part");
  }
  Signature sig;
  sig.signer_key_id = kp.key_id;
  sig.payload_digest = digest(payload);
  sig.sig_bytes.resize(crypto_sign_BYTES);
  unsigned long long len = 0;
  crypto_sign_detached(sig.sig_bytes.data(), &len, payload.data(), payload.size(),
                       kp.secret_part.data());
  sig.sig_bytes.resize(len);
  return sig;
}

bool verify(std::span<const std::uint8_t> payload, const Signature& sig,
            std::span<const std::uint8_t> public_part) {
  ensure_sodium();
  if (public_part.size() != crypto_sign_PUBLICKEYBYTES ||
      sig.sig_bytes.size() != crypto_sign_BYTES) {
    return false;
  }
  if (sig.payload_digest != digest(payload)) {
    return false;
  }
  return crypto_sign_verify_detached(sig.sig_bytes.data(), payload.data(), payload.size(),
                                     public_part.data()) == 0;
}

Bytes credential_signing_bytes(const VerifiableCredential& vc) {
  // Claims are encoded key-ordered so the bytes do not depend on insertion
  // order. Duplicate keys are rejected to keep the encoding injective.
  std::set<std::string_view> seen;
  for (const auto& [k, v] : vc.claims) {
    if (!seen.insert(k).second) {
      throw Error("credential claims contain duplicate key '" + k + "'");
    }
  }
  auto sorted = vc.claims;
  std::sort(sorted.begin(), sorted.end());

  CanonicalWriter claims;
  for (const auto& [k, v] : sorted) {
    claims.field(k, std::string_view(v));
  }
  CanonicalWriter w;
  w.nested("claims", claims)
      .field("subject", std::string_view(vc.subject))
      .field("valid_from", vc.valid_from)
      .field("valid_until", vc.valid_until);
  return w.take();
}

VerifiableCredential issue_credential(std::string subject,
                                      std::vector<std::pair<std::string, std::string>> claims,
                                      std::int64_t valid_from, std::int64_t valid_until,
                                      const KeyPair& issuer) {
  VerifiableCredential vc;
  vc.subject = std::move(subject);
  vc.claims = std::move(claims);
  vc.valid_from = valid_from;
  vc.valid_until = valid_until;
  vc.issuer_signature = sign(credential_signing_bytes(vc), issuer);
  return vc;
}

bool verify_credential(const VerifiableCredential& vc,
                       std::span<const std::uint8_t> issuer_public, std::int64_t now) {
  if (now < vc.valid_from || now > vc.valid_until) {
    return false;
  }
  return verify(credential_signing_bytes(vc), vc.issuer_signature, issuer_public);
}

}  // namespace mb
