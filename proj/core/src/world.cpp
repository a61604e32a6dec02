#include "mb/world.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mb/canonical.hpp"
#include "mb/errors.hpp"

namespace mb {

namespace {

using nlohmann::json;

std::array<std::uint8_t, kSeedSize> seed_from_hex(const std::string& hex,
                                                  const std::string& context) {
  Bytes raw;
  try {
    raw = from_hex(hex);
  } catch (const Error& e) {
    throw IngestError(context + ": " + e.what());
  }
  if (raw.size() != kSeedSize) {
    throw IngestError(context + ": seed must be 32 bytes (64 hex chars), got " +
                      std::to_string(raw.size()));
  }
  std::array<std::uint8_t, kSeedSize> seed{};
  std::copy(raw.begin(), raw.end(), seed.begin());
  return seed;
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::set<std::string> word_set(std::string_view text) {
  std::set<std::string> words;
  std::string current;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!current.empty()) {
      words.insert(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) {
    words.insert(std::move(current));
  }
  return words;
}

template <typename T>
T require(const json& j, const char* key, const std::string& context) {
  if (!j.contains(key)) {
    throw IngestError(context + ": missing field '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw IngestError(context + ": field '" + key + "': " + e.what());
  }
}

}  // namespace

Bytes token_signing_bytes(const IdentityToken& token) {
  CanonicalWriter w;
  w.field("expires_at", token.expires_at)
      .field("issued_at", token.issued_at)
      .field("subject_user_id", std::string_view(token.subject_user_id))
      .field("token_id", std::string_view(token.token_id));
  return w.take();
}

WorldStore WorldStore::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IngestError("cannot open world file: " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str(), path.string());
}

WorldStore WorldStore::from_json(std::string_view text, std::string_view origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw IngestError(std::string(origin) + ": " + e.what());
  }
  const std::string ctx(origin);

  WorldStore store;
  if (j.contains("settings")) {
    const json& s = j.at("settings");
    store.settings_.tax_percent = s.value("tax_percent", std::int64_t{0});
    store.settings_.token_ttl_seconds = s.value("token_ttl_seconds", std::int64_t{900});
    if (s.contains("shipping")) {
      for (const auto& [merchant, amount] : s.at("shipping").items()) {
        store.settings_.flat_shipping[merchant] = amount.get<std::int64_t>();
      }
    }
  }

  std::set<std::string> product_ids;
  for (const json& p : j.value("products", json::array())) {
    Product prod;
    prod.product_id = require<std::string>(p, "product_id", ctx + ": product");
    const std::string pctx = ctx + ": product '" + prod.product_id + "'";
    prod.merchant_id = require<std::string>(p, "merchant_id", pctx);
    prod.title = require<std::string>(p, "title", pctx);
    prod.description = p.value("description", "");
    prod.price = require<std::int64_t>(p, "price", pctx);
    prod.keywords = p.value("keywords", std::vector<std::string>{});
    prod.refundable = p.value("refundable", true);
    if (!product_ids.insert(prod.product_id).second) {
      throw IngestError(pctx + ": duplicate product_id");
    }
    store.products_.push_back(std::move(prod));
  }

  std::set<std::string> user_ids;
  std::set<std::string> method_ids;
  for (const json& u : j.value("users", json::array())) {
    UserRecord user;
    user.user_id = require<std::string>(u, "user_id", ctx + ": user");
    const std::string uctx = ctx + ": user '" + user.user_id + "'";
    user.display_name = require<std::string>(u, "display_name", uctx);
    user.shipping_address = require<std::string>(u, "shipping_address", uctx);
    user.key_seed = seed_from_hex(require<std::string>(u, "key_seed_hex", uctx), uctx);
    for (const json& m : u.value("payment_methods", json::array())) {
      PaymentMethod pm;
      pm.payment_method_id = require<std::string>(m, "payment_method_id", uctx);
      pm.scheme_label = require<std::string>(m, "scheme_label", uctx);
      pm.masked_number = require<std::string>(m, "masked_number", uctx);
      pm.owner_user_id = m.value("owner_user_id", user.user_id);
      if (pm.owner_user_id != user.user_id) {
        throw IngestError(uctx + ": payment method '" + pm.payment_method_id +
                          "' owner does not match enclosing user");
      }
      if (!method_ids.insert(pm.payment_method_id).second) {
        throw IngestError(uctx + ": duplicate payment_method_id '" + pm.payment_method_id + "'");
      }
      user.payment_methods.push_back(std::move(pm));
    }
    if (!user_ids.insert(user.user_id).second) {
      throw IngestError(uctx + ": duplicate user_id");
    }
    store.users_.push_back(std::move(user));
  }

  for (const json& k : j.value("platform_keys", json::array())) {
    std::string name = require<std::string>(k, "name", ctx + ": platform key");
    const std::string kctx = ctx + ": platform key '" + name + "'";
    auto seed = seed_from_hex(require<std::string>(k, "seed_hex", kctx), kctx);
    if (!store.platform_seeds_.emplace(std::move(name), seed).second) {
      throw IngestError(kctx + ": duplicate platform key name");
    }
  }

  return store;
}

std::string WorldStore::to_json() const {
  json shipping = json::object();
  for (const auto& [merchant, amount] : settings_.flat_shipping) {
    shipping[merchant] = amount;
  }
  json products = json::array();
  for (const Product& p : products_) {
    products.push_back({{"product_id", p.product_id},
                        {"merchant_id", p.merchant_id},
                        {"title", p.title},
                        {"description", p.description},
                        {"price", p.price},
                        {"keywords", p.keywords},
                        {"refundable", p.refundable}});
  }
  json users = json::array();
  for (const UserRecord& u : users_) {
    json methods = json::array();
    for (const PaymentMethod& m : u.payment_methods) {
      methods.push_back({{"payment_method_id", m.payment_method_id},
                         {"scheme_label", m.scheme_label},
                         {"masked_number", m.masked_number},
                         {"owner_user_id", m.owner_user_id}});
    }
    users.push_back({{"user_id", u.user_id},
                     {"display_name", u.display_name},
                     {"shipping_address", u.shipping_address},
                     {"payment_methods", methods},
                     {"key_seed_hex", to_hex(u.key_seed)}});
  }
  json keys = json::array();
  for (const auto& [name, seed] : platform_seeds_) {
    keys.push_back({{"name", name}, {"seed_hex", to_hex(seed)}});
  }
  json j{{"settings",
          {{"tax_percent", settings_.tax_percent},
           {"token_ttl_seconds", settings_.token_ttl_seconds},
           {"shipping", shipping}}},
         {"products", products},
         {"users", users},
         {"platform_keys", keys}};
  return j.dump(2) + "\n";
}

void WorldStore::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) {
    throw IngestError("cannot write world file: " + path.string());
  }
  out << to_json();
}

const Product* WorldStore::find_product(std::string_view product_id) const {
  for (const Product& p : products_) {
    if (p.product_id == product_id) return &p;
  }
  return nullptr;
}

const UserRecord* WorldStore::find_user(std::string_view user_id) const {
  for (const UserRecord& u : users_) {
    if (u.user_id == user_id) return &u;
  }
  return nullptr;
}

KeyPair WorldStore::user_key(std::string_view user_id) const {
  const UserRecord* user = find_user(user_id);
  if (user == nullptr) {
    throw AuthError("unknown user: " + std::string(user_id));
  }
  return keygen(user->key_seed);
}

KeyPair WorldStore::platform_key(std::string_view name) const {
  auto it = platform_seeds_.find(std::string(name));
  if (it == platform_seeds_.end()) {
    throw AuthError("unknown platform key: " + std::string(name));
  }
  return keygen(it->second);
}

std::vector<std::string> WorldStore::platform_names() const {
  std::vector<std::string> names;
  for (const auto& [name, seed] : platform_seeds_) {
    names.push_back(name);
  }
  return names;
}

KeyDirectory WorldStore::public_key_directory() const {
  KeyDirectory dir;
  for (const UserRecord& u : users_) {
    KeyPair kp = keygen(u.key_seed);
    dir[kp.key_id] = kp.public_part;
  }
  for (const auto& [name, seed] : platform_seeds_) {
    KeyPair kp = keygen(seed);
    dir[kp.key_id] = kp.public_part;
  }
  return dir;
}

IdentityToken WorldStore::issue_identity_token(std::string_view user_id,
                                               std::int64_t now) const {
  const UserRecord* user = find_user(user_id);
  if (user == nullptr) {
    throw AuthError("cannot issue identity token for unknown user: " + std::string(user_id));
  }
  IdentityToken token;
  token.subject_user_id = user->user_id;
  token.issued_at = now;
  token.expires_at = now + settings_.token_ttl_seconds;
  CanonicalWriter id_basis;
  id_basis.field("issued_at", token.issued_at)
      .field("subject", std::string_view(token.subject_user_id));
  Digest d = digest(id_basis.take());
  token.token_id = "tok-" + to_hex({d.data(), 8});
  token.issuer_signature = sign(token_signing_bytes(token), platform_key(kAuthPlatform));
  return token;
}

bool WorldStore::token_valid(const IdentityToken& token, std::int64_t now) const {
  if (now >= token.expires_at) {
    return false;
  }
  auto it = platform_seeds_.find(std::string(kAuthPlatform));
  if (it == platform_seeds_.end()) {
    return false;
  }
  KeyPair platform = keygen(it->second);
  return verify(token_signing_bytes(token), token.issuer_signature, platform.public_part);
}

std::int64_t WorldStore::shipping_for(std::string_view merchant_id) const {
  auto it = settings_.flat_shipping.find(std::string(merchant_id));
  return it == settings_.flat_shipping.end() ? 0 : it->second;
}

std::int64_t WorldStore::tax_for(std::int64_t amount) const {
  return amount * settings_.tax_percent / 100;
}

void WorldStore::append_to_description(std::string_view product_id, std::string_view text) {
  for (Product& p : products_) {
    if (p.product_id == product_id) {
      if (!p.description.empty()) {
        p.description += " ";
      }
      p.description += text;
      return;
    }
  }
  throw ScenarioError("injection targets unknown product: " + std::string(product_id));
}

std::vector<Product> search_catalog(const WorldStore& store,
                                    std::span<const std::string> query_keywords) {
  std::vector<Product> hits;
  if (query_keywords.empty()) {
    return hits;
  }
  for (const Product& p : store.products()) {
    std::set<std::string> searchable = word_set(p.title);
    for (const std::string& k : p.keywords) {
      searchable.insert(lower_ascii(k));
    }
    bool match = std::any_of(query_keywords.begin(), query_keywords.end(),
                             [&](const std::string& q) {
                               return searchable.count(lower_ascii(q)) > 0;
                             });
    if (match) {
      hits.push_back(p);
    }
  }
  return hits;
}

}  // namespace mb
