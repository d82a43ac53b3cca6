#pragma once

// Rotary angle functions and the planar rotation applied to queries/keys.
//
// Per plane j (pairs (2j, 2j+1), interleaved):
//   ordinal, timestamp_feature:  theta_j = p * inv_freq_j
//   to_rope:                     theta_j = T_norm * inv_freq_j
//   siren:                       theta_j = f(t(T))_j * omega_s_j + p * inv_freq_j * lambda
// with inv_freq_j = base^(-2j / d_k).

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "sirenrope/siren_phi.hpp"
#include "sirenrope/temporal.hpp"
#include "sirenrope/tensor.hpp"

namespace sirenrope {

enum class RotaryMode { ordinal, timestamp_feature, to_rope, siren };

std::string_view to_string(RotaryMode mode);
/// Accepts "ordinal", "ts-feature" / "timestamp_feature", "to-rope" / "to_rope", "siren".
RotaryMode parse_rotary_mode(std::string_view text);

struct RotaryConfig {
  RotaryMode mode = RotaryMode::ordinal;
  double base = 1e6;
  std::size_t head_dim = 16;
  Tensor lambda;   // [1], learnable, starts at 1
  Tensor omega_s;  // [head_dim / 2], learnable, starts at pi

  static RotaryConfig make(RotaryMode mode, double base, std::size_t head_dim);
  void validate() const;
  std::size_t planes() const { return head_dim / 2; }
  /// Whether lambda / omega_s take part in the angle (siren mode only).
  bool has_gates() const { return mode == RotaryMode::siren; }
};

/// base^(-2j / d_k) for j = 0 .. d_k/2 - 1.
std::vector<double> inverse_frequencies(double base, std::size_t head_dim);

/// Fused angles for one sequence position.
struct AngleVector {
  Tensor theta;  // [d_k / 2]
};

/// Batched angles, C x d_k/2. `phi_output` is f(t) for every position and is
/// required in siren mode; other modes never read it or the timestamps'
/// cyclical features.
Tensor fused_angles(const RotaryConfig& config, std::span<const double> positions,
                    std::span<const double> timestamps, const TimeNormalization& norm,
                    const Tensor* phi_output);

/// Single-position angle. In siren mode `phi` is evaluated on decompose(T)
/// (or on the normalized offset alone when phi takes one input).
AngleVector angle(const RotaryConfig& config, double position, double unix_seconds,
                  const SirenPhi* phi, const TimeNormalization& norm);

/// Rotates each interleaved pair of x by the matching angle. x is [d_k] or
/// C x d_k; theta is [d_k/2] or C x d_k/2. Differentiable in both.
Tensor rotate(const Tensor& x, const Tensor& theta);
Tensor rotate(const Tensor& x, const AngleVector& angle);

}  // namespace sirenrope
