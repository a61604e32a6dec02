#pragma once

// Synthetic world data: merchant catalog, user records, credential vault.
// Read-only after load; mutation happens only by loading a new store. The
// product description field is the untrusted channel every downstream
// consumer must tag as such.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mb/crypto.hpp"
#include "mb/mandate.hpp"

namespace mb {

struct Product {
  std::string product_id;
  std::string merchant_id;
  std::string title;
  std::string description;  // UNTRUSTED content channel
  std::int64_t price = 0;   // minor units
  std::vector<std::string> keywords;
  bool refundable = true;

  bool operator==(const Product&) const = default;
};

struct PaymentMethod {
  std::string payment_method_id;
  std::string scheme_label;
  std::string masked_number;
  std::string owner_user_id;

  bool operator==(const PaymentMethod&) const = default;
};

struct UserRecord {
  std::string user_id;
  std::string display_name;
  std::string shipping_address;
  std::vector<PaymentMethod> payment_methods;
  std::array<std::uint8_t, kSeedSize> key_seed{};

  bool operator==(const UserRecord&) const = default;
};

struct IdentityToken {
  std::string token_id;
  std::string subject_user_id;
  std::int64_t issued_at = 0;
  std::int64_t expires_at = 0;
  Signature issuer_signature;

  bool operator==(const IdentityToken&) const = default;
};

Bytes token_signing_bytes(const IdentityToken& token);

struct WorldSettings {
  std::int64_t tax_percent = 0;
  std::int64_t token_ttl_seconds = 900;
  std::map<std::string, std::int64_t> flat_shipping;  // merchant_id -> minor units

  bool operator==(const WorldSettings&) const = default;
};

inline constexpr std::string_view kAuthPlatform = "auth-platform";
inline constexpr std::string_view kPaymentPlatform = "payment-platform";

class WorldStore {
 public:
  WorldStore() = default;

  static WorldStore load(const std::filesystem::path& path);  // IngestError
  static WorldStore from_json(std::string_view text, std::string_view origin = "<memory>");

  std::string to_json() const;
  void save(const std::filesystem::path& path) const;

  const std::vector<Product>& products() const { return products_; }
  const std::vector<UserRecord>& users() const { return users_; }
  const WorldSettings& settings() const { return settings_; }

  const Product* find_product(std::string_view product_id) const;
  const UserRecord* find_user(std::string_view user_id) const;

  // Secret material stays inside the store and the session's user device
  // model; key pairs are derived on demand from stored seeds.
  KeyPair user_key(std::string_view user_id) const;          // AuthError when unknown
  KeyPair platform_key(std::string_view name) const;         // AuthError when unknown
  std::vector<std::string> platform_names() const;
  KeyDirectory public_key_directory() const;                 // users + platforms

  IdentityToken issue_identity_token(std::string_view user_id, std::int64_t now) const;
  bool token_valid(const IdentityToken& token, std::int64_t now) const;

  std::int64_t shipping_for(std::string_view merchant_id) const;
  std::int64_t tax_for(std::int64_t amount) const;

  // Red-team hook: injection payloads append to a product description on a
  // scenario-local copy of the store.
  void append_to_description(std::string_view product_id, std::string_view text);

  bool operator==(const WorldStore&) const = default;

 private:
  WorldSettings settings_;
  std::vector<Product> products_;
  std::vector<UserRecord> users_;
  std::map<std::string, std::array<std::uint8_t, kSeedSize>> platform_seeds_;
};

// Every product whose keywords or title intersect the query, in catalog
// order; ranking is the reasoner's job. Empty query yields an empty list.
std::vector<Product> search_catalog(const WorldStore& store,
                                    std::span<const std::string> query_keywords);

}  // namespace mb
