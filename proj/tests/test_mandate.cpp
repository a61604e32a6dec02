#include <doctest.h>

#include <random>

#include "mb/errors.hpp"
#include "mb/mandate.hpp"
#include "support/oracles.hpp"

using namespace mb;

namespace {

KeyPair test_user() {
  std::array<std::uint8_t, kSeedSize> seed{};
  seed.fill(0x11);
  return keygen(seed);
}

constexpr std::int64_t kNow = 1700000000;

IntentMandate make_intent(const KeyPair& user) {
  IntentConstraints c;
  c.keywords = {"basketball", "shoes"};
  c.max_price = 20000;
  c.allow_nonrefundable = true;
  return build_and_sign_intent(user, "victim-1", "shopping-agent",
                               "I am looking to buy a new pair of basketball shoes", c, kNow,
                               kNow + 3600);
}

}  // namespace

TEST_CASE("canonical encoding is deterministic and injective on field changes") {
  KeyPair user = test_user();
  IntentMandate m = make_intent(user);
  CHECK(canonical_encode(m) == canonical_encode(m));

  IntentMandate changed = m;
  changed.constraints.max_price += 1;
  CHECK(canonical_encode(m) != canonical_encode(changed));

  IntentMandate renamed = m;
  renamed.natural_intent += "!";
  CHECK(canonical_encode(m) != canonical_encode(renamed));
}

TEST_CASE("canonical encoding is independent of construction order") {
  IntentMandate a;
  a.mandate_id = "im-x";
  a.user_id = "u";
  a.agent_id = "s";
  a.natural_intent = "buy shoes";
  a.constraints.keywords = {"shoes"};
  a.constraints.max_price = 100;
  a.valid_from = 1;
  a.valid_until = 2;

  IntentMandate b;
  b.valid_until = 2;
  b.valid_from = 1;
  b.constraints.max_price = 100;
  b.constraints.keywords = {"shoes"};
  b.natural_intent = "buy shoes";
  b.agent_id = "s";
  b.user_id = "u";
  b.mandate_id = "im-x";

  CHECK(canonical_encode(a) == canonical_encode(b));
}

TEST_CASE("intent mandates sign, verify and reject bad inputs") {
  KeyPair user = test_user();
  IntentMandate m = make_intent(user);
  CHECK(verify(canonical_encode(m), m.user_signature, user.public_part));
  CHECK(m.mandate_id.substr(0, 3) == "im-");

  // identical inputs, identical bytes
  IntentMandate m2 = make_intent(user);
  CHECK(m == m2);

  IntentConstraints c;
  c.max_price = 100;
  CHECK_THROWS_AS(build_and_sign_intent(user, "u", "a", "", c, kNow, kNow + 10), MandateError);
  CHECK_THROWS_AS(build_and_sign_intent(user, "u", "a", "buy", c, kNow + 10, kNow),
                  MandateError);
  CHECK_THROWS_AS(build_and_sign_intent(user, "u", "a", "buy", c, kNow, kNow), MandateError);
}

TEST_CASE("cart totals are recomputed internally") {
  KeyPair user = test_user();
  IntentMandate intent = make_intent(user);
  CartMandate cart = build_and_sign_cart(intent, "peak-sports",
                                         {{"p-1", "Trail Blazer", 12000, 1}}, 500, 960, user);
  CHECK(cart.total == 13460);
  CHECK(cart.intent_digest == mandate_digest(intent));
  CHECK(verify(canonical_encode(cart), cart.user_signature, user.public_part));

  CartMandate multi = build_and_sign_cart(
      intent, "peak-sports", {{"p-1", "A", 5000, 2}, {"p-2", "B", 3000, 1}}, 200, 400, user);
  CHECK(multi.total == 5000 * 2 + 3000 + 200 + 400);
}

TEST_CASE("cart constraint and chain failures") {
  KeyPair user = test_user();
  IntentMandate intent = make_intent(user);

  CHECK_THROWS_AS(build_and_sign_cart(intent, "peak-sports",
                                      {{"p-1", "Gold Edition", 25000, 1}}, 0, 0, user),
                  ConstraintViolation);

  IntentConstraints scoped;
  scoped.keywords = {"shoes"};
  scoped.max_price = 20000;
  scoped.approved_merchants = {"peak-sports"};
  IntentMandate scoped_intent = build_and_sign_intent(user, "victim-1", "shopping-agent",
                                                      "buy shoes", scoped, kNow, kNow + 10);
  CHECK_THROWS_AS(build_and_sign_cart(scoped_intent, "court-gear",
                                      {{"p-1", "X", 1000, 1}}, 0, 0, user),
                  ConstraintViolation);
  // empty approved_merchants list means any merchant
  CartMandate any_ok =
      build_and_sign_cart(intent, "court-gear", {{"p-1", "X", 1000, 1}}, 0, 0, user);
  CHECK(any_ok.merchant_id == "court-gear");

  IntentMandate corrupted = intent;
  corrupted.natural_intent += "tampered";
  CHECK_THROWS_AS(build_and_sign_cart(corrupted, "peak-sports", {{"p-1", "X", 1000, 1}}, 0, 0,
                                      user),
                  ChainError);
}

TEST_CASE("payment mandates bind amount and payee to the cart") {
  KeyPair user = test_user();
  IntentMandate intent = make_intent(user);
  CartMandate cart = build_and_sign_cart(intent, "peak-sports",
                                         {{"p-1", "Trail Blazer", 12000, 1}}, 500, 960, user);
  PaymentMandate payment = build_and_sign_payment(cart, "pm-victim-visa", user);
  CHECK(payment.amount == cart.total);
  CHECK(payment.payee_merchant_id == "peak-sports");
  CHECK(payment.cart_digest == mandate_digest(cart));

  CartMandate tampered = cart;
  tampered.total += 1;
  CHECK_THROWS_AS(build_and_sign_payment(tampered, "pm-victim-visa", user), ChainError);
}

TEST_CASE("verify_chain accepts honest chains and names the first broken link") {
  KeyPair user = test_user();
  MandateChain chain = mbtest::build_honest_chain(user, kNow);
  KeyDirectory keys{{user.key_id, user.public_part}};

  CHECK(verify_chain(chain, kNow + 10, keys) == ChainVerdict::Verified);
  CHECK(verify_chain(chain, kNow, keys) == ChainVerdict::Verified);
  CHECK(verify_chain(chain, kNow + 3600, keys) == ChainVerdict::Verified);

  SUBCASE("expired outside the intent window") {
    CHECK(verify_chain(chain, kNow + 3601, keys) == ChainVerdict::Expired);
    CHECK(verify_chain(chain, kNow - 1, keys) == ChainVerdict::Expired);
  }
  SUBCASE("mutated cart total breaks the cart signature") {
    chain.cart.total += 1;
    CHECK(verify_chain(chain, kNow, keys) == ChainVerdict::CartSig);
  }
  SUBCASE("mutated intent text breaks the intent signature") {
    chain.intent.natural_intent += "!";
    CHECK(verify_chain(chain, kNow, keys) == ChainVerdict::IntentSig);
  }
  SUBCASE("unknown signer key") {
    KeyDirectory empty;
    CHECK(verify_chain(chain, kNow, empty) == ChainVerdict::IntentSig);
  }
}

TEST_CASE("link integrity: swapping in another signed cart is detected") {
  KeyPair user = test_user();
  IntentMandate intent = make_intent(user);
  CartMandate cart_a = build_and_sign_cart(intent, "peak-sports",
                                           {{"p-1", "A", 12000, 1}}, 500, 960, user);
  CartMandate cart_b = build_and_sign_cart(intent, "peak-sports",
                                           {{"p-2", "B", 11000, 1}}, 500, 880, user);
  PaymentMandate payment = build_and_sign_payment(cart_a, "pm-1", user);
  KeyDirectory keys{{user.key_id, user.public_part}};

  MandateChain swapped{intent, cart_b, payment};
  CHECK(verify_chain(swapped, kNow, keys) == ChainVerdict::CartLink);
}

TEST_CASE("random single-field mutations are always detected") {
  KeyPair user = test_user();
  KeyDirectory keys{{user.key_id, user.public_part}};
  std::mt19937_64 rng(99);
  for (int i = 0; i < 100; ++i) {
    MandateChain chain = mbtest::build_honest_chain(user, kNow);
    std::string stage = mbtest::mutate_chain(chain, rng);
    ChainVerdict verdict = verify_chain(chain, kNow, keys);
    REQUIRE(verdict != ChainVerdict::Verified);
    REQUIRE(mbtest::verdict_matches_stage(verdict, stage));
  }
}

TEST_CASE("mandate json documents round-trip") {
  KeyPair user = test_user();
  MandateChain chain = mbtest::build_honest_chain(user, kNow);

  CHECK(intent_from_json(to_json_string(chain.intent)) == chain.intent);
  CHECK(cart_from_json(to_json_string(chain.cart)) == chain.cart);
  CHECK(payment_from_json(to_json_string(chain.payment)) == chain.payment);

  std::array<std::uint8_t, kSeedSize> pseed{};
  pseed.fill(0xbb);
  KeyPair platform = keygen(pseed);
  Receipt receipt = build_and_sign_receipt(chain.payment, kNow + 5, platform);
  CHECK(receipt_from_json(to_json_string(receipt)) == receipt);
  CHECK(receipt.payment_digest == mandate_digest(chain.payment));

  CHECK_THROWS_AS(intent_from_json("{not json"), Error);
}
