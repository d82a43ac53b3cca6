#include <benchmark/benchmark.h>

#include "sirenrope/rng.hpp"
#include "sirenrope/rotary.hpp"
#include "sirenrope/tensor.hpp"

using namespace sirenrope;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  auto rng = make_rng(seed, "bench");
  return uniform_values(rng, n, -1.0, 1.0);
}

Tensor random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  return Tensor::from_data({rows, cols}, random_values(rows * cols, seed));
}

}  // namespace

static void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(n, n, 1);
  const auto b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b).data().data());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(16, 256);

static void BM_MatmulNT(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_matrix(n, n, 1);
  const auto b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul_nt(a, b).data().data());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_MatmulNT)->RangeMultiplier(2)->Range(16, 256);

static void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Tensor a = Tensor::parameter({n, n}, random_values(n * n, 1));
  Tensor b = Tensor::parameter({n, n}, random_values(n * n, 2));
  for (auto _ : state) {
    Tape tape;
    TapeScope scope(tape);
    tape.backward(sum(matmul(a, b)));
  }
}
BENCHMARK(BM_MatmulBackward)->RangeMultiplier(2)->Range(16, 128);

// C x d_k rotation, d_k = 16.
static void BM_Rotate(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto x = random_matrix(c, 16, 3);
  const auto theta = random_matrix(c, 8, 4);
  for (auto _ : state) benchmark::DoNotOptimize(rotate(x, theta).data().data());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(c));
}
BENCHMARK(BM_Rotate)->Arg(64)->Arg(512);
