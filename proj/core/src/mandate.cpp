#include "mb/mandate.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "mb/canonical.hpp"
#include "mb/errors.hpp"

namespace mb {

namespace {

using nlohmann::json;

// Mandate ids derive from the digest of the body encoded without id or
// signature, so identical inputs yield byte-identical mandates.
std::string derive_id(std::string_view prefix, const Bytes& body_sans_id) {
  Digest d = digest(body_sans_id);
  return std::string(prefix) + "-" + to_hex({d.data(), 8});
}

CanonicalWriter encode_constraints(const IntentConstraints& c) {
  CanonicalWriter w;
  w.field("allow_nonrefundable", c.allow_nonrefundable)
      .list("approved_merchants", c.approved_merchants)
      .list("keywords", c.keywords)
      .field("max_price", c.max_price);
  return w;
}

CanonicalWriter encode_intent_body(const IntentMandate& m, bool with_id) {
  CanonicalWriter w;
  w.field("agent_id", std::string_view(m.agent_id));
  w.nested("constraints", encode_constraints(m.constraints));
  if (with_id) {
    w.field("mandate_id", std::string_view(m.mandate_id));
  }
  w.field("natural_intent", std::string_view(m.natural_intent))
      .field("user_id", std::string_view(m.user_id))
      .field("valid_from", m.valid_from)
      .field("valid_until", m.valid_until);
  return w;
}

CanonicalWriter encode_cart_body(const CartMandate& m, bool with_id) {
  CanonicalWriter items;
  for (const LineItem& li : m.line_items) {
    CanonicalWriter item;
    item.field("product_id", std::string_view(li.product_id))
        .field("quantity", li.quantity)
        .field("title", std::string_view(li.title))
        .field("unit_price", li.unit_price);
    items.nested("item", item);
  }
  CanonicalWriter w;
  w.field("intent_digest", as_span(m.intent_digest));
  w.nested("line_items", items);
  if (with_id) {
    w.field("mandate_id", std::string_view(m.mandate_id));
  }
  w.field("merchant_id", std::string_view(m.merchant_id))
      .field("shipping", m.shipping)
      .field("tax", m.tax)
      .field("total", m.total);
  return w;
}

CanonicalWriter encode_payment_body(const PaymentMandate& m, bool with_id) {
  CanonicalWriter w;
  w.field("amount", m.amount).field("cart_digest", as_span(m.cart_digest));
  if (with_id) {
    w.field("mandate_id", std::string_view(m.mandate_id));
  }
  w.field("payee_merchant_id", std::string_view(m.payee_merchant_id))
      .field("payment_method_id", std::string_view(m.payment_method_id));
  return w;
}

CanonicalWriter encode_signature(const Signature& sig) {
  CanonicalWriter w;
  w.field("payload_digest", as_span(sig.payload_digest))
      .field("sig_bytes", std::span<const std::uint8_t>(sig.sig_bytes))
      .field("signer_key_id", std::string_view(sig.signer_key_id));
  return w;
}

template <typename Mandate>
Bytes signed_encode_impl(const Mandate& m) {
  CanonicalWriter w;
  Bytes body = canonical_encode(m);
  w.field("body", std::span<const std::uint8_t>(body));
  w.nested("user_signature", encode_signature(m.user_signature));
  return w.take();
}

json signature_to_json(const Signature& sig) {
  return json{{"payload_digest", to_hex(as_span(sig.payload_digest))},
              {"sig_bytes", to_hex(sig.sig_bytes)},
              {"signer_key_id", sig.signer_key_id}};
}

Signature signature_from_json(const json& j) {
  Signature sig;
  sig.signer_key_id = j.at("signer_key_id").get<std::string>();
  Bytes d = from_hex(j.at("payload_digest").get<std::string>());
  if (d.size() != sig.payload_digest.size()) {
    throw Error("signature payload_digest must be 32 bytes");
  }
  std::copy(d.begin(), d.end(), sig.payload_digest.begin());
  sig.sig_bytes = from_hex(j.at("sig_bytes").get<std::string>());
  return sig;
}

Digest digest_from_hex(const std::string& hex) {
  Bytes b = from_hex(hex);
  if (b.size() != 32) {
    throw Error("digest field must be 32 bytes");
  }
  Digest d;
  std::copy(b.begin(), b.end(), d.begin());
  return d;
}

json parse_doc(std::string_view doc, const char* what) {
  json j = json::parse(doc, nullptr, false);
  if (j.is_discarded()) {
    throw Error(std::string("malformed ") + what + " document");
  }
  return j;
}

}  // namespace

Bytes canonical_encode(const IntentMandate& m) { return encode_intent_body(m, true).take(); }
Bytes canonical_encode(const CartMandate& m) { return encode_cart_body(m, true).take(); }
Bytes canonical_encode(const PaymentMandate& m) { return encode_payment_body(m, true).take(); }

Bytes canonical_encode(const Receipt& r) {
  CanonicalWriter w;
  w.field("amount", r.amount)
      .field("issued_at", r.issued_at)
      .field("payee_merchant_id", std::string_view(r.payee_merchant_id))
      .field("payment_digest", as_span(r.payment_digest))
      .field("receipt_id", std::string_view(r.receipt_id));
  return w.take();
}

Bytes signed_encode(const IntentMandate& m) { return signed_encode_impl(m); }
Bytes signed_encode(const CartMandate& m) { return signed_encode_impl(m); }
Bytes signed_encode(const PaymentMandate& m) { return signed_encode_impl(m); }

Digest mandate_digest(const IntentMandate& m) { return digest(signed_encode(m)); }
Digest mandate_digest(const CartMandate& m) { return digest(signed_encode(m)); }
Digest mandate_digest(const PaymentMandate& m) { return digest(signed_encode(m)); }

Digest receipt_digest(const Receipt& r) {
  CanonicalWriter w;
  Bytes body = canonical_encode(r);
  w.field("body", std::span<const std::uint8_t>(body));
  w.nested("platform_signature", encode_signature(r.platform_signature));
  return digest(w.take());
}

IntentMandate build_and_sign_intent(const KeyPair& user_key, std::string user_id,
                                    std::string agent_id, std::string natural_intent,
                                    IntentConstraints constraints, std::int64_t valid_from,
                                    std::int64_t valid_until) {
  if (natural_intent.empty()) {
    throw MandateError("intent mandate requires non-empty natural_intent");
  }
  if (valid_from >= valid_until) {
    throw MandateError("intent validity window is empty");
  }
  IntentMandate m;
  m.user_id = std::move(user_id);
  m.agent_id = std::move(agent_id);
  m.natural_intent = std::move(natural_intent);
  m.constraints = std::move(constraints);
  m.valid_from = valid_from;
  m.valid_until = valid_until;
  m.mandate_id = derive_id("im", encode_intent_body(m, false).take());
  m.user_signature = sign(canonical_encode(m), user_key);
  return m;
}

CartMandate build_and_sign_cart(const IntentMandate& intent, std::string merchant_id,
                                std::vector<LineItem> line_items, std::int64_t shipping,
                                std::int64_t tax, const KeyPair& user_key) {
  if (!verify(canonical_encode(intent), intent.user_signature, user_key.public_part)) {
    throw ChainError("intent mandate signature does not verify");
  }
  CartMandate m;
  m.intent_digest = mandate_digest(intent);
  m.merchant_id = std::move(merchant_id);
  m.line_items = std::move(line_items);
  m.shipping = shipping;
  m.tax = tax;
  m.total = shipping + tax;
  for (const LineItem& li : m.line_items) {
    m.total += li.unit_price * li.quantity;
  }
  if (m.total > intent.constraints.max_price) {
    throw ConstraintViolation("cart total " + std::to_string(m.total) +
                              " exceeds intent max_price " +
                              std::to_string(intent.constraints.max_price));
  }
  const auto& approved = intent.constraints.approved_merchants;
  if (!approved.empty() &&
      std::find(approved.begin(), approved.end(), m.merchant_id) == approved.end()) {
    throw ConstraintViolation("merchant '" + m.merchant_id + "' is not approved by the intent");
  }
  m.mandate_id = derive_id("cm", encode_cart_body(m, false).take());
  m.user_signature = sign(canonical_encode(m), user_key);
  return m;
}

PaymentMandate build_and_sign_payment(const CartMandate& cart, std::string payment_method_id,
                                      const KeyPair& user_key) {
  if (!verify(canonical_encode(cart), cart.user_signature, user_key.public_part)) {
    throw ChainError("cart mandate signature does not verify");
  }
  PaymentMandate m;
  m.cart_digest = mandate_digest(cart);
  m.payment_method_id = std::move(payment_method_id);
  m.payee_merchant_id = cart.merchant_id;
  m.amount = cart.total;
  m.mandate_id = derive_id("pm", encode_payment_body(m, false).take());
  m.user_signature = sign(canonical_encode(m), user_key);
  return m;
}

Receipt build_and_sign_receipt(const PaymentMandate& payment, std::int64_t issued_at,
                               const KeyPair& platform_key) {
  Receipt r;
  r.payment_digest = mandate_digest(payment);
  r.amount = payment.amount;
  r.payee_merchant_id = payment.payee_merchant_id;
  r.issued_at = issued_at;
  r.receipt_id = derive_id("rcpt", canonical_encode(r));
  r.platform_signature = sign(canonical_encode(r), platform_key);
  return r;
}

std::string_view to_string(ChainVerdict v) {
  switch (v) {
    case ChainVerdict::Verified: return "Verified";
    case ChainVerdict::IntentSig: return "intent_sig";
    case ChainVerdict::CartSig: return "cart_sig";
    case ChainVerdict::PaymentSig: return "payment_sig";
    case ChainVerdict::IntentLink: return "intent_link";
    case ChainVerdict::CartLink: return "cart_link";
    case ChainVerdict::AmountMismatch: return "amount_mismatch";
    case ChainVerdict::Expired: return "expired";
  }
  return "unknown";
}

ChainVerdict verify_chain(const MandateChain& chain, std::int64_t now,
                          const KeyDirectory& keys) {
  auto check_sig = [&](const auto& mandate) {
    auto it = keys.find(mandate.user_signature.signer_key_id);
    if (it == keys.end()) return false;
    return verify(canonical_encode(mandate), mandate.user_signature, it->second);
  };
  if (!check_sig(chain.intent)) return ChainVerdict::IntentSig;
  if (!check_sig(chain.cart)) return ChainVerdict::CartSig;
  if (!check_sig(chain.payment)) return ChainVerdict::PaymentSig;
  if (chain.cart.intent_digest != mandate_digest(chain.intent)) return ChainVerdict::IntentLink;
  if (chain.payment.cart_digest != mandate_digest(chain.cart)) return ChainVerdict::CartLink;

  std::int64_t expected_total = chain.cart.shipping + chain.cart.tax;
  for (const LineItem& li : chain.cart.line_items) {
    expected_total += li.unit_price * li.quantity;
  }
  if (chain.cart.total != expected_total ||
      chain.payment.amount != chain.cart.total ||
      chain.payment.payee_merchant_id != chain.cart.merchant_id) {
    return ChainVerdict::AmountMismatch;
  }
  if (now < chain.intent.valid_from || now > chain.intent.valid_until) {
    return ChainVerdict::Expired;
  }
  return ChainVerdict::Verified;
}

std::string to_json_string(const IntentMandate& m) {
  json j{{"agent_id", m.agent_id},
         {"constraints",
          {{"allow_nonrefundable", m.constraints.allow_nonrefundable},
           {"approved_merchants", m.constraints.approved_merchants},
           {"keywords", m.constraints.keywords},
           {"max_price", m.constraints.max_price}}},
         {"mandate_id", m.mandate_id},
         {"natural_intent", m.natural_intent},
         {"type", "intent_mandate"},
         {"user_id", m.user_id},
         {"user_signature", signature_to_json(m.user_signature)},
         {"valid_from", m.valid_from},
         {"valid_until", m.valid_until}};
  return j.dump();
}

std::string to_json_string(const CartMandate& m) {
  json items = json::array();
  for (const LineItem& li : m.line_items) {
    items.push_back({{"product_id", li.product_id},
                     {"quantity", li.quantity},
                     {"title", li.title},
                     {"unit_price", li.unit_price}});
  }
  json j{{"intent_digest", to_hex(as_span(m.intent_digest))},
         {"line_items", items},
         {"mandate_id", m.mandate_id},
         {"merchant_id", m.merchant_id},
         {"shipping", m.shipping},
         {"tax", m.tax},
         {"total", m.total},
         {"type", "cart_mandate"},
         {"user_signature", signature_to_json(m.user_signature)}};
  return j.dump();
}

std::string to_json_string(const PaymentMandate& m) {
  json j{{"amount", m.amount},
         {"cart_digest", to_hex(as_span(m.cart_digest))},
         {"mandate_id", m.mandate_id},
         {"payee_merchant_id", m.payee_merchant_id},
         {"payment_method_id", m.payment_method_id},
         {"type", "payment_mandate"},
         {"user_signature", signature_to_json(m.user_signature)}};
  return j.dump();
}

std::string to_json_string(const Receipt& r) {
  json j{{"amount", r.amount},
         {"issued_at", r.issued_at},
         {"payee_merchant_id", r.payee_merchant_id},
         {"payment_digest", to_hex(as_span(r.payment_digest))},
         {"platform_signature", signature_to_json(r.platform_signature)},
         {"receipt_id", r.receipt_id},
         {"type", "receipt"}};
  return j.dump();
}

IntentMandate intent_from_json(std::string_view doc) {
  json j = parse_doc(doc, "intent mandate");
  IntentMandate m;
  m.mandate_id = j.at("mandate_id").get<std::string>();
  m.user_id = j.at("user_id").get<std::string>();
  m.agent_id = j.at("agent_id").get<std::string>();
  m.natural_intent = j.at("natural_intent").get<std::string>();
  const json& c = j.at("constraints");
  m.constraints.keywords = c.at("keywords").get<std::vector<std::string>>();
  m.constraints.max_price = c.at("max_price").get<std::int64_t>();
  m.constraints.allow_nonrefundable = c.at("allow_nonrefundable").get<bool>();
  m.constraints.approved_merchants = c.at("approved_merchants").get<std::vector<std::string>>();
  m.valid_from = j.at("valid_from").get<std::int64_t>();
  m.valid_until = j.at("valid_until").get<std::int64_t>();
  m.user_signature = signature_from_json(j.at("user_signature"));
  return m;
}

CartMandate cart_from_json(std::string_view doc) {
  json j = parse_doc(doc, "cart mandate");
  CartMandate m;
  m.mandate_id = j.at("mandate_id").get<std::string>();
  m.intent_digest = digest_from_hex(j.at("intent_digest").get<std::string>());
  m.merchant_id = j.at("merchant_id").get<std::string>();
  for (const json& item : j.at("line_items")) {
    LineItem li;
    li.product_id = item.at("product_id").get<std::string>();
    li.title = item.at("title").get<std::string>();
    li.unit_price = item.at("unit_price").get<std::int64_t>();
    li.quantity = item.at("quantity").get<std::int64_t>();
    m.line_items.push_back(std::move(li));
  }
  m.shipping = j.at("shipping").get<std::int64_t>();
  m.tax = j.at("tax").get<std::int64_t>();
  m.total = j.at("total").get<std::int64_t>();
  m.user_signature = signature_from_json(j.at("user_signature"));
  return m;
}

PaymentMandate payment_from_json(std::string_view doc) {
  json j = parse_doc(doc, "payment mandate");
  PaymentMandate m;
  m.mandate_id = j.at("mandate_id").get<std::string>();
  m.cart_digest = digest_from_hex(j.at("cart_digest").get<std::string>());
  m.payment_method_id = j.at("payment_method_id").get<std::string>();
  m.payee_merchant_id = j.at("payee_merchant_id").get<std::string>();
  m.amount = j.at("amount").get<std::int64_t>();
  m.user_signature = signature_from_json(j.at("user_signature"));
  return m;
}

Receipt receipt_from_json(std::string_view doc) {
  json j = parse_doc(doc, "receipt");
  Receipt r;
  r.receipt_id = j.at("receipt_id").get<std::string>();
  r.payment_digest = digest_from_hex(j.at("payment_digest").get<std::string>());
  r.amount = j.at("amount").get<std::int64_t>();
  r.payee_merchant_id = j.at("payee_merchant_id").get<std::string>();
  r.issued_at = j.at("issued_at").get<std::int64_t>();
  r.platform_signature = signature_from_json(j.at("platform_signature"));
  return r;
}

}  // namespace mb
