#pragma once

// The three mandate types, their canonical encoding, signing, hash-linking
// and chain-of-evidence verification. All money values are integer minor
// units; no floating point anywhere near a total.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mb/bytes.hpp"
#include "mb/crypto.hpp"

namespace mb {

struct IntentConstraints {
  std::vector<std::string> keywords;
  std::int64_t max_price = 0;
  bool allow_nonrefundable = true;
  std::vector<std::string> approved_merchants;  // empty list = any merchant allowed

  bool operator==(const IntentConstraints&) const = default;
};

struct IntentMandate {
  std::string mandate_id;
  std::string user_id;
  std::string agent_id;  // the authorized actor
  std::string natural_intent;
  IntentConstraints constraints;
  std::int64_t valid_from = 0;
  std::int64_t valid_until = 0;
  Signature user_signature;

  bool operator==(const IntentMandate&) const = default;
};

struct LineItem {
  std::string product_id;
  std::string title;
  std::int64_t unit_price = 0;
  std::int64_t quantity = 0;

  bool operator==(const LineItem&) const = default;
};

struct CartMandate {
  std::string mandate_id;
  Digest intent_digest{};  // digest of the signed IntentMandate
  std::string merchant_id;
  std::vector<LineItem> line_items;
  std::int64_t shipping = 0;
  std::int64_t tax = 0;
  std::int64_t total = 0;  // sum(unit_price * quantity) + shipping + tax
  Signature user_signature;

  bool operator==(const CartMandate&) const = default;
};

struct PaymentMandate {
  std::string mandate_id;
  Digest cart_digest{};  // digest of the signed CartMandate
  std::string payment_method_id;
  std::string payee_merchant_id;
  std::int64_t amount = 0;
  Signature user_signature;

  bool operator==(const PaymentMandate&) const = default;
};

struct MandateChain {
  IntentMandate intent;
  CartMandate cart;
  PaymentMandate payment;
};

// Signed proof of completion, issued by the simulated payment platform and
// digest-linked to the PaymentMandate.
struct Receipt {
  std::string receipt_id;
  Digest payment_digest{};
  std::int64_t amount = 0;
  std::string payee_merchant_id;
  std::int64_t issued_at = 0;
  Signature platform_signature;

  bool operator==(const Receipt&) const = default;
};

// Canonical bytes each signature covers: deterministic, injective,
// key-ordered, signature field excluded.
Bytes canonical_encode(const IntentMandate& m);
Bytes canonical_encode(const CartMandate& m);
Bytes canonical_encode(const PaymentMandate& m);
Bytes canonical_encode(const Receipt& r);

// Canonical bytes of the signed mandate (body plus signature record); the
// digest links in the chain cover these, so post-signing tampering with the
// signature itself also breaks the link.
Bytes signed_encode(const IntentMandate& m);
Bytes signed_encode(const CartMandate& m);
Bytes signed_encode(const PaymentMandate& m);

Digest mandate_digest(const IntentMandate& m);
Digest mandate_digest(const CartMandate& m);
Digest mandate_digest(const PaymentMandate& m);
Digest receipt_digest(const Receipt& r);

IntentMandate build_and_sign_intent(const KeyPair& user_key, std::string user_id,
                                    std::string agent_id, std::string natural_intent,
                                    IntentConstraints constraints, std::int64_t valid_from,
                                    std::int64_t valid_until);

// Recomputes the total internally; never trusts a caller-supplied total.
CartMandate build_and_sign_cart(const IntentMandate& intent, std::string merchant_id,
                                std::vector<LineItem> line_items, std::int64_t shipping,
                                std::int64_t tax, const KeyPair& user_key);

PaymentMandate build_and_sign_payment(const CartMandate& cart, std::string payment_method_id,
                                      const KeyPair& user_key);

Receipt build_and_sign_receipt(const PaymentMandate& payment, std::int64_t issued_at,
                               const KeyPair& platform_key);

enum class ChainVerdict {
  Verified,
  IntentSig,
  CartSig,
  PaymentSig,
  IntentLink,
  CartLink,
  AmountMismatch,
  Expired,
};

std::string_view to_string(ChainVerdict v);

// key_id -> public_part for every signer the chain may reference.
using KeyDirectory = std::map<std::string, Bytes, std::less<>>;

// Verified iff all three signatures verify, both digest links match, the
// payment matches the cart, and now is inside the intent validity window.
// The verdict names the first violated link in the order listed above.
ChainVerdict verify_chain(const MandateChain& chain, std::int64_t now,
                          const KeyDirectory& keys);

// Key-ordered JSON documents, one per mandate, for audit logs. Digests and
// signatures rendered as lowercase hex.
std::string to_json_string(const IntentMandate& m);
std::string to_json_string(const CartMandate& m);
std::string to_json_string(const PaymentMandate& m);
std::string to_json_string(const Receipt& r);

IntentMandate intent_from_json(std::string_view doc);
CartMandate cart_from_json(std::string_view doc);
PaymentMandate payment_from_json(std::string_view doc);
Receipt receipt_from_json(std::string_view doc);

}  // namespace mb
