#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace sirenrope {

std::size_t next_power_of_two(std::size_t n);

/// In-place iterative radix-2 transform; size must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& values);

struct Spectrum {
  std::vector<double> frequencies;  // cycles/day, uniform from 0
  std::vector<double> magnitudes;
  double bin_width() const { return frequencies.size() > 1 ? frequencies[1] : 0.0; }
};

struct SpectrumOptions {
  bool subtract_mean = true;  // DC then carries |sum| of the raw input
  bool hann_window = false;
};

/// One-sided magnitude spectrum of a uniformly sampled curve. Times are in
/// seconds; the input is zero-padded to the next power of two. Throws
/// std::invalid_argument on a non-uniform or too-short grid.
Spectrum fft_spectrum(std::span<const double> times_seconds, std::span<const double> values,
                      const SpectrumOptions& options = {});

struct Peak {
  std::size_t bin = 0;
  double frequency = 0.0;
  double magnitude = 0.0;
};

/// Median magnitude over the non-DC bins.
double median_magnitude(const Spectrum& spectrum);

/// Local maxima (excluding DC) whose magnitude is at least k times the
/// median, strongest first.
std::vector<Peak> find_peaks(const Spectrum& spectrum, double k);

/// Strongest peak within `tolerance` cycles/day of `frequency`, if any.
const Peak* peak_near(const std::vector<Peak>& peaks, double frequency, double tolerance);

}  // namespace sirenrope
