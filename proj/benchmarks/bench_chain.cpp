#include <benchmark/benchmark.h>

#include "mb/mandate.hpp"

namespace {

mb::KeyPair bench_user() {
  std::array<std::uint8_t, mb::kSeedSize> seed{};
  seed.fill(0x11);
  return mb::keygen(seed);
}

mb::MandateChain build_chain(const mb::KeyPair& user) {
  mb::IntentConstraints c;
  c.keywords = {"basketball", "shoes"};
  c.max_price = 20000;
  mb::IntentMandate intent = mb::build_and_sign_intent(
      user, "user-1", "shopping-agent", "buy basketball shoes", c, 0, 3600);
  mb::CartMandate cart =
      mb::build_and_sign_cart(intent, "m-1", {{"p-1", "Shoe", 12000, 1}}, 500, 960, user);
  mb::PaymentMandate payment = mb::build_and_sign_payment(cart, "pm-1", user);
  return {std::move(intent), std::move(cart), std::move(payment)};
}

void BM_BuildChain(benchmark::State& state) {
  mb::KeyPair user = bench_user();
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_chain(user));
  }
}
BENCHMARK(BM_BuildChain);

void BM_VerifyChain(benchmark::State& state) {
  mb::KeyPair user = bench_user();
  mb::MandateChain chain = build_chain(user);
  mb::KeyDirectory keys{{user.key_id, user.public_part}};
  for (auto _ : state) {
    benchmark::DoNotOptimize(mb::verify_chain(chain, 10, keys));
  }
}
BENCHMARK(BM_VerifyChain);

}  // namespace
