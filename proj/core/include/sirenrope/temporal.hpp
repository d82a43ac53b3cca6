#pragma once

#include <array>
#include <span>

#include "sirenrope/tensor.hpp"

namespace sirenrope {

inline constexpr double kSecondsPerDay = 86'400.0;
inline constexpr double kSecondsPerWeek = 604'800.0;
inline constexpr double kSecondsPerYear = 365.25 * kSecondsPerDay;

/// Maps a Unix timestamp to the long-range offset (T - t_ref) / t_span.
struct TimeNormalization {
  double t_ref = 0.0;
  double t_span = kSecondsPerYear;

  void validate() const;
  double normalize(double unix_seconds) const { return (unix_seconds - t_ref) / t_span; }
};

/// Cyclical day/week phase pairs plus the normalized offset.
struct TemporalFeatures {
  double day_cos = 1.0;
  double day_sin = 0.0;
  double week_cos = 1.0;
  double week_sin = 0.0;
  double t_norm = 0.0;

  static constexpr std::size_t kWidth = 5;
  std::array<double, kWidth> as_array() const {
    return {day_cos, day_sin, week_cos, week_sin, t_norm};
  }
};

/// Phases are taken from T mod period, so T and T + k*period give identical
/// pairs for integer-second T. Out-of-range T passes through unclamped.
TemporalFeatures decompose(double unix_seconds, const TimeNormalization& norm);

/// C x 5 constant matrix, one decompose() row per timestamp.
Tensor temporal_feature_matrix(std::span<const double> timestamps, const TimeNormalization& norm);

/// C x 1 matrix holding only the normalized offset (scalar-time ablation).
Tensor scalar_time_matrix(std::span<const double> timestamps, const TimeNormalization& norm);

}  // namespace sirenrope
