#include "sirenrope/rotary.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "sirenrope/errors.hpp"

namespace sirenrope {

std::string_view to_string(RotaryMode mode) {
  switch (mode) {
    case RotaryMode::ordinal: return "ordinal";
    case RotaryMode::timestamp_feature: return "ts-feature";
    case RotaryMode::to_rope: return "to-rope";
    case RotaryMode::siren: return "siren";
  }
  return "unknown";
}

RotaryMode parse_rotary_mode(std::string_view text) {
  if (text == "ordinal") return RotaryMode::ordinal;
  if (text == "ts-feature" || text == "timestamp_feature") return RotaryMode::timestamp_feature;
  if (text == "to-rope" || text == "to_rope") return RotaryMode::to_rope;
  if (text == "siren") return RotaryMode::siren;
  throw ConfigError("unknown rotary mode '" + std::string(text) +
                    "' (expected ordinal, ts-feature, to-rope or siren)");
}

RotaryConfig RotaryConfig::make(RotaryMode mode, double base, std::size_t head_dim) {
  RotaryConfig cfg;
  cfg.mode = mode;
  cfg.base = base;
  cfg.head_dim = head_dim;
  cfg.validate();
  cfg.lambda = Tensor::parameter({1}, {1.0});
  cfg.omega_s = Tensor::parameter({head_dim / 2}, std::vector<double>(head_dim / 2, std::numbers::pi));
  return cfg;
}

void RotaryConfig::validate() const {
  if (head_dim == 0 || head_dim % 2 != 0) {
    throw ConfigError("rotary head dimension must be even and positive, got " +
                      std::to_string(head_dim));
  }
  if (!(base > 1.0) || !std::isfinite(base)) {
    throw ConfigError("rotary base must be finite and > 1");
  }
  if (lambda.defined() && lambda.numel() != 1) throw ConfigError("lambda must be a scalar");
  if (omega_s.defined() && omega_s.numel() != planes()) {
    throw ConfigError("omega_s must have d_k/2 entries");
  }
}

std::vector<double> inverse_frequencies(double base, std::size_t head_dim) {
  if (head_dim == 0 || head_dim % 2 != 0) {
    throw ConfigError("inverse_frequencies: head dimension must be even and positive, got " +
                      std::to_string(head_dim));
  }
  if (!(base > 1.0)) throw ConfigError("inverse_frequencies: base must be > 1");
  std::vector<double> out(head_dim / 2);
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = std::pow(base, -2.0 * static_cast<double>(j) / static_cast<double>(head_dim));
  }
  return out;
}

namespace {

Tensor index_times_frequency(std::span<const double> index, const std::vector<double>& freq) {
  const std::size_t c = index.size(), h = freq.size();
  std::vector<double> out(c * h);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < h; ++j) out[i * h + j] = index[i] * freq[j];
  return Tensor::from_data({c, h}, std::move(out));
}

}  // namespace

Tensor fused_angles(const RotaryConfig& config, std::span<const double> positions,
                    std::span<const double> timestamps, const TimeNormalization& norm,
                    const Tensor* phi_output) {
  config.validate();
  const auto freq = inverse_frequencies(config.base, config.head_dim);
  switch (config.mode) {
    case RotaryMode::ordinal:
    case RotaryMode::timestamp_feature:
      return index_times_frequency(positions, freq);
    case RotaryMode::to_rope: {
      if (timestamps.size() != positions.size()) {
        throw ShapeError("fused_angles: positions and timestamps differ in length");
      }
      std::vector<double> t_norm(timestamps.size());
      for (std::size_t i = 0; i < t_norm.size(); ++i) t_norm[i] = norm.normalize(timestamps[i]);
      return index_times_frequency(t_norm, freq);
    }
    case RotaryMode::siren: {
      if (phi_output == nullptr) {
        throw ConfigError("siren rotary mode needs the angle network output");
      }
      if (!config.lambda.defined() || !config.omega_s.defined()) {
        throw ConfigError("siren rotary mode needs lambda and omega_s");
      }
      if (phi_output->rows() != positions.size() || phi_output->cols() != config.planes()) {
        throw ShapeError("fused_angles: phi output " + shape_to_string(phi_output->shape()) +
                         " does not match " + std::to_string(positions.size()) + " x " +
                         std::to_string(config.planes()));
      }
      const Tensor temporal = mul_row(*phi_output, config.omega_s);
      const Tensor ordinal = mul(index_times_frequency(positions, freq), config.lambda);
      return add(temporal, ordinal);
    }
  }
  throw ConfigError("unhandled rotary mode");
}

AngleVector angle(const RotaryConfig& config, double position, double unix_seconds,
                  const SirenPhi* phi, const TimeNormalization& norm) {
  if (position < 0.0) throw std::invalid_argument("angle: ordinal position must be >= 0");
  const double p[1] = {position};
  const double t[1] = {unix_seconds};
  Tensor phi_out;
  if (config.mode == RotaryMode::siren) {
    if (phi == nullptr) throw ConfigError("siren rotary mode needs an angle network");
    const Tensor features = phi->config().in_dim == 1 ? scalar_time_matrix(t, norm)
                                                      : temporal_feature_matrix(t, norm);
    phi_out = phi->forward(features);
  }
  const Tensor theta = fused_angles(config, p, t, norm, phi_out.defined() ? &phi_out : nullptr);
  return AngleVector{reshape(theta, {config.planes()})};
}

Tensor rotate(const Tensor& x, const Tensor& theta) {
  const std::size_t rows = x.rows(), d = x.cols();
  if (theta.rows() != rows || 2 * theta.cols() != d) {
    throw ShapeError("rotate: vector " + shape_to_string(x.shape()) + " needs angles of width " +
                     std::to_string(d / 2) + ", got " + shape_to_string(theta.shape()));
  }
  const std::size_t h = d / 2;
  const auto xv = x.data();
  const auto tv = theta.data();
  std::vector<double> c(rows * h), s(rows * h), out(rows * d);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < h; ++j) {
      const double cj = std::cos(tv[r * h + j]);
      const double sj = std::sin(tv[r * h + j]);
      c[r * h + j] = cj;
      s[r * h + j] = sj;
      const double a = xv[r * d + 2 * j];
      const double b = xv[r * d + 2 * j + 1];
      out[r * d + 2 * j] = a * cj - b * sj;
      out[r * d + 2 * j + 1] = a * sj + b * cj;
    }
  }
  return record_op(x.shape(), std::move(out), {x, theta},
                   [x, theta, rows, d, h, c = std::move(c),
                    s = std::move(s)](std::span<const double> g) mutable {
                     const auto xv = x.data();
                     if (x.requires_grad()) {
                       auto gx = x.grad_buffer();
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t j = 0; j < h; ++j) {
                           const double g0 = g[r * d + 2 * j], g1 = g[r * d + 2 * j + 1];
                           const double cj = c[r * h + j], sj = s[r * h + j];
                           gx[r * d + 2 * j] += g0 * cj + g1 * sj;
                           gx[r * d + 2 * j + 1] += -g0 * sj + g1 * cj;
                         }
                     }
                     if (theta.requires_grad()) {
                       auto gt = theta.grad_buffer();
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t j = 0; j < h; ++j) {
                           const double a = xv[r * d + 2 * j], b = xv[r * d + 2 * j + 1];
                           const double cj = c[r * h + j], sj = s[r * h + j];
                           // d/dtheta of (a c - b s, a s + b c) = (-(a s + b c), a c - b s)
                           gt[r * h + j] += g[r * d + 2 * j] * -(a * sj + b * cj) +
                                            g[r * d + 2 * j + 1] * (a * cj - b * sj);
                         }
                     }
                   });
}

Tensor rotate(const Tensor& x, const AngleVector& angle) { return rotate(x, angle.theta); }

}  // namespace sirenrope
