#include "sirenrope/fft.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "sirenrope/temporal.hpp"

namespace sirenrope {

std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void fft_inplace(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("fft size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        // direct twiddles keep the error from growing with len
        const std::complex<double> w = std::polar(1.0, ang * static_cast<double>(k));
        const auto u = a[start + k];
        const auto v = a[start + k + len / 2] * w;
        a[start + k] = u + v;
        a[start + k + len / 2] = u - v;
      }
    }
  }
}

Spectrum fft_spectrum(std::span<const double> times, std::span<const double> values,
                      const SpectrumOptions& options) {
  if (times.size() != values.size()) throw std::invalid_argument("fft: times/values length mismatch");
  if (times.size() < 2) throw std::invalid_argument("fft: need at least two samples");
  const double dt = times[1] - times[0];
  if (!(dt > 0.0)) throw std::invalid_argument("fft: sample times must increase");
  const double tol = 1e-6 * dt;
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (std::abs((times[i] - times[i - 1]) - dt) > tol)
      throw std::invalid_argument("fft: non-uniform sampling grid at index " + std::to_string(i));
  }

  const std::size_t n = values.size();
  double total = 0.0;
  for (double v : values) total += v;
  const double mean = total / static_cast<double>(n);
  const std::size_t padded = next_power_of_two(n);
  std::vector<std::complex<double>> buf(padded, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double v = options.subtract_mean ? values[i] - mean : values[i];
    if (options.hann_window && n > 1)
      v *= 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
    buf[i] = v;
  }
  fft_inplace(buf);

  const double dt_days = dt / kSecondsPerDay;
  Spectrum s;
  const std::size_t half = padded / 2 + 1;
  s.frequencies.resize(half);
  s.magnitudes.resize(half);
  for (std::size_t k = 0; k < half; ++k) {
    s.frequencies[k] = static_cast<double>(k) / (static_cast<double>(padded) * dt_days);
    s.magnitudes[k] = std::abs(buf[k]);
  }
  if (options.subtract_mean) s.magnitudes[0] = std::abs(total);
  return s;
}

double median_magnitude(const Spectrum& spectrum) {
  if (spectrum.magnitudes.size() < 2) return 0.0;
  std::vector<double> m(spectrum.magnitudes.begin() + 1, spectrum.magnitudes.end());
  const auto mid = m.begin() + static_cast<std::ptrdiff_t>(m.size() / 2);
  std::nth_element(m.begin(), mid, m.end());
  if (m.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(m.begin(), mid);
  return 0.5 * (lower + upper);
}

std::vector<Peak> find_peaks(const Spectrum& spectrum, double k) {
  const auto& m = spectrum.magnitudes;
  const double threshold = k * median_magnitude(spectrum);
  std::vector<Peak> peaks;
  for (std::size_t i = 1; i < m.size(); ++i) {
    const bool left = i == 1 || m[i] > m[i - 1];
    const bool right = i + 1 == m.size() || m[i] >= m[i + 1];
    if (left && right && m[i] >= threshold && m[i] > 0.0)
      peaks.push_back({i, spectrum.frequencies[i], m[i]});
  }
  std::stable_sort(peaks.begin(), peaks.end(),
                   [](const Peak& a, const Peak& b) { return a.magnitude > b.magnitude; });
  return peaks;
}

const Peak* peak_near(const std::vector<Peak>& peaks, double frequency, double tolerance) {
  for (const auto& p : peaks)
    if (std::abs(p.frequency - frequency) <= tolerance) return &p;
  return nullptr;
}

}  // namespace sirenrope
