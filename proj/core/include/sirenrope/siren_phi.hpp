#pragma once

// Dual-branch angle network: f(t) = f_sin(t) + f_dnn(t).
//
// The periodic branch stacks sine layers sin(omega0 * x W + b); the aperiodic
// branch stacks ReLU layers. Each branch ends in a linear map to out_dim
// (= d_k / 2) angles. Both output maps start at zero, so f == 0 at init.

#include <cstdint>
#include <string>
#include <vector>

#include "sirenrope/tensor.hpp"
#include "sirenrope/weights_io.hpp"

namespace sirenrope {

struct DenseLayer {
  Tensor weight;  // in x out
  Tensor bias;    // [out]

  Tensor affine(const Tensor& x) const { return add_row(matmul(x, weight), bias); }
  std::size_t in_dim() const { return weight.rows(); }
  std::size_t out_dim() const { return weight.cols(); }
};

struct SirenPhiConfig {
  std::size_t in_dim = 5;
  std::size_t hidden = 64;
  std::size_t depth = 2;
  std::size_t out_dim = 8;
  double omega0 = 30.0;
  bool siren_enabled = true;
  bool dnn_enabled = true;

  void validate() const;
};

class SirenPhi {
 public:
  SirenPhi() = default;

  /// First sine layer ~ U(-1/in, 1/in); deeper sine layers
  /// ~ U(-sqrt(6/fan_in)/omega0, +sqrt(6/fan_in)/omega0); ReLU layers
  /// ~ U(-sqrt(6/fan_in), +sqrt(6/fan_in)) with zero bias; output maps zero.
  static SirenPhi init_siren(std::uint64_t seed, const SirenPhiConfig& config);
  static SirenPhi init_siren(std::uint64_t seed, std::size_t in_dim, std::size_t hidden,
                             std::size_t out_dim, double omega0 = 30.0);

  /// features: C x in_dim -> C x out_dim.
  Tensor forward(const Tensor& features) const;
  Tensor siren_branch(const Tensor& features) const;
  Tensor dnn_branch(const Tensor& features) const;

  /// omega0 * x W + b for every sine layer, in order (used for init checks).
  std::vector<Tensor> sine_preactivations(const Tensor& features) const;

  const SirenPhiConfig& config() const { return config_; }
  /// Copy sharing the same parameter storage with different branch toggles.
  SirenPhi with_toggles(bool siren_enabled, bool dnn_enabled) const;

  std::vector<DenseLayer>& sine_layers() { return sine_layers_; }
  DenseLayer& siren_output() { return siren_out_; }
  std::vector<DenseLayer>& relu_layers() { return relu_layers_; }
  DenseLayer& dnn_output() { return dnn_out_; }

  /// Named parameters under `prefix` (e.g. "phi."), in a fixed order.
  std::vector<WeightRecord> named_parameters(const std::string& prefix) const;

 private:
  void check_input(const Tensor& features) const;

  SirenPhiConfig config_;
  std::vector<DenseLayer> sine_layers_;
  DenseLayer siren_out_;
  std::vector<DenseLayer> relu_layers_;
  DenseLayer dnn_out_;
};

}  // namespace sirenrope
