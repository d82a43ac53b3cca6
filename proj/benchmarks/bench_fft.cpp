#include <benchmark/benchmark.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "sirenrope/fft.hpp"
#include "sirenrope/temporal.hpp"

using namespace sirenrope;

static void BM_FftInplace(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<std::complex<double>> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(0.1 * static_cast<double>(i));
  for (auto _ : state) {
    auto y = x;
    fft_inplace(y);
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_FftInplace)->RangeMultiplier(4)->Range(256, 16384);

static void BM_SpectrumAndPeaks(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> t(n), v(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = 365.0 * kSecondsPerDay * static_cast<double>(i) / static_cast<double>(n);
    v[i] = std::cos(2.0 * std::numbers::pi * t[i] / kSecondsPerDay);
  }
  for (auto _ : state) {
    const auto s = fft_spectrum(t, v);
    benchmark::DoNotOptimize(find_peaks(s, 3.0).size());
  }
}
BENCHMARK(BM_SpectrumAndPeaks)->Arg(4096);
