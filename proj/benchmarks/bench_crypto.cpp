#include <benchmark/benchmark.h>

#include "mb/crypto.hpp"

namespace {

mb::KeyPair bench_key() {
  std::array<std::uint8_t, mb::kSeedSize> seed{};
  seed.fill(0x42);
  return mb::keygen(seed);
}

void BM_Keygen(benchmark::State& state) {
  std::array<std::uint8_t, mb::kSeedSize> seed{};
  for (auto _ : state) {
    seed[0] ^= 1;
    benchmark::DoNotOptimize(mb::keygen(seed));
  }
}
BENCHMARK(BM_Keygen);

void BM_Digest(benchmark::State& state) {
  mb::Bytes payload(static_cast<std::size_t>(state.range(0)), 0x5a);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mb::digest(payload));
  }
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Digest)->Arg(64)->Arg(1024)->Arg(16384);

void BM_SignVerify(benchmark::State& state) {
  mb::KeyPair kp = bench_key();
  mb::Bytes payload(256, 0x33);
  for (auto _ : state) {
    mb::Signature sig = mb::sign(payload, kp);
    benchmark::DoNotOptimize(mb::verify(payload, sig, kp.public_part));
  }
}
BENCHMARK(BM_SignVerify);

}  // namespace
