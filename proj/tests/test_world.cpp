#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "mb/errors.hpp"
#include "mb/world.hpp"

using namespace mb;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = MB_FIXTURES_DIR;

WorldStore fixture_world() { return WorldStore::load(kFixtures / "world_shoes.json"); }

}  // namespace

TEST_CASE("fixture world loads the evaluation catalog and both users") {
  WorldStore w = fixture_world();
  CHECK(w.products().size() == 5);
  const Product* target = w.find_product("p-court-lite");
  REQUIRE(target != nullptr);
  CHECK(target->title == "Lightweight Court Basketball Shoes");
  CHECK(w.find_user("victim-1") != nullptr);
  CHECK(w.find_user("attacker-1") != nullptr);
  CHECK(w.settings().tax_percent == 8);
  CHECK(w.shipping_for("peak-sports") == 500);
  CHECK(w.tax_for(12000) == 960);
}

TEST_CASE("duplicate ids are rejected with context") {
  const char* doc = R"({
    "products": [
      {"product_id": "p-1", "merchant_id": "m", "title": "A", "price": 1},
      {"product_id": "p-1", "merchant_id": "m", "title": "B", "price": 2}
    ],
    "users": [], "platform_keys": []
  })";
  CHECK_THROWS_WITH_AS(WorldStore::from_json(doc, "dup.json"),
                       doctest::Contains("duplicate product_id"), IngestError);
}

TEST_CASE("parse failures carry origin context") {
  CHECK_THROWS_AS(WorldStore::from_json("{broken", "bad.json"), IngestError);
  CHECK_THROWS_AS(WorldStore::load(kFixtures / "no_such_world.json"), IngestError);
  const char* missing_field = R"({"products": [{"product_id": "p-1"}]})";
  CHECK_THROWS_WITH_AS(WorldStore::from_json(missing_field, "m.json"),
                       doctest::Contains("merchant_id"), IngestError);
}

TEST_CASE("an empty catalog is a valid world") {
  WorldStore w = WorldStore::from_json(R"({"products": [], "users": [], "platform_keys": []})");
  CHECK(w.products().empty());
  CHECK(w.users().empty());
}

TEST_CASE("save/load round-trip is structurally equal") {
  WorldStore w = fixture_world();
  fs::path tmp = fs::temp_directory_path() / "mb_world_roundtrip.json";
  w.save(tmp);
  WorldStore reloaded = WorldStore::load(tmp);
  CHECK(w == reloaded);
  fs::remove(tmp);
}

TEST_CASE("catalog search matches keywords or title, in catalog order") {
  WorldStore w = fixture_world();
  std::vector<std::string> query = {"basketball", "shoes"};
  std::vector<Product> hits = search_catalog(w, query);
  CHECK(hits.size() == 5);
  // order-stable: two runs give the same order as the catalog
  std::vector<Product> again = search_catalog(w, query);
  CHECK(hits == again);
  for (std::size_t i = 0; i < hits.size(); ++i) {
    CHECK(hits[i].product_id == w.products()[i].product_id);
  }

  CHECK(search_catalog(w, std::vector<std::string>{"nonexistent-term"}).empty());
  CHECK(search_catalog(w, std::vector<std::string>{}).empty());
  // title words match too
  CHECK(search_catalog(w, std::vector<std::string>{"trainers"}).size() == 1);
}

TEST_CASE("identity tokens issue, validate and expire") {
  WorldStore w = fixture_world();
  const std::int64_t now = 1700000000;
  IdentityToken token = w.issue_identity_token("attacker-1", now);
  CHECK(token.subject_user_id == "attacker-1");
  CHECK(token.expires_at == now + 900);
  CHECK(w.token_valid(token, now));
  CHECK(w.token_valid(token, now + 899));
  CHECK_FALSE(w.token_valid(token, now + 900));
  CHECK_FALSE(w.token_valid(token, now + 5000));

  IdentityToken forged = token;
  forged.subject_user_id = "victim-1";
  CHECK_FALSE(w.token_valid(forged, now));

  CHECK_THROWS_AS(w.issue_identity_token("nobody", now), AuthError);
}

TEST_CASE("keys derive deterministically from stored seeds") {
  WorldStore w = fixture_world();
  KeyPair a = w.user_key("victim-1");
  KeyPair b = w.user_key("victim-1");
  CHECK(a == b);
  CHECK_THROWS_AS(w.user_key("nobody"), AuthError);
  CHECK_THROWS_AS(w.platform_key("no-platform"), AuthError);

  KeyDirectory dir = w.public_key_directory();
  CHECK(dir.size() == 4);  // two users + two platforms
  CHECK(dir.count(a.key_id) == 1);
}

TEST_CASE("description injection appends to the target product only") {
  WorldStore w = fixture_world();
  std::string before = w.find_product("p-court-lite")->description;
  w.append_to_description("p-court-lite", "EXTRA");
  CHECK(w.find_product("p-court-lite")->description == before + " EXTRA");
  CHECK_THROWS_AS(w.append_to_description("p-none", "x"), ScenarioError);
}
