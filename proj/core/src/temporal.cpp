#include "sirenrope/temporal.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "sirenrope/errors.hpp"

namespace sirenrope {

namespace {

double phase(double t, double period) {
  double r = std::fmod(t, period);
  if (r < 0.0) r += period;
  return 2.0 * std::numbers::pi * r / period;
}

}  // namespace

void TimeNormalization::validate() const {
  if (!(t_span > 0.0) || !std::isfinite(t_span)) {
    throw ConfigError("time normalization span must be positive and finite");
  }
  if (!std::isfinite(t_ref)) throw ConfigError("time normalization origin must be finite");
}

TemporalFeatures decompose(double unix_seconds, const TimeNormalization& norm) {
  const double day = phase(unix_seconds, kSecondsPerDay);
  const double week = phase(unix_seconds, kSecondsPerWeek);
  return TemporalFeatures{std::cos(day), std::sin(day), std::cos(week), std::sin(week),
                          norm.normalize(unix_seconds)};
}

Tensor temporal_feature_matrix(std::span<const double> timestamps, const TimeNormalization& norm) {
  std::vector<double> out;
  out.reserve(timestamps.size() * TemporalFeatures::kWidth);
  for (double t : timestamps) {
    const auto f = decompose(t, norm).as_array();
    out.insert(out.end(), f.begin(), f.end());
  }
  return Tensor::from_data({timestamps.size(), TemporalFeatures::kWidth}, std::move(out));
}

Tensor scalar_time_matrix(std::span<const double> timestamps, const TimeNormalization& norm) {
  std::vector<double> out;
  out.reserve(timestamps.size());
  for (double t : timestamps) out.push_back(norm.normalize(t));
  return Tensor::from_data({timestamps.size(), 1}, std::move(out));
}

}  // namespace sirenrope
