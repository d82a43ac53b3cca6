#include "sirenrope/siren_phi.hpp"

#include <cmath>

#include "sirenrope/errors.hpp"
#include "sirenrope/rng.hpp"

namespace sirenrope {

namespace {

DenseLayer uniform_layer(std::uint64_t seed, const std::string& name, std::size_t in,
                         std::size_t out, double weight_bound, double bias_bound) {
  auto rng = make_rng(seed, name);
  DenseLayer layer;
  layer.weight = Tensor::parameter({in, out}, uniform_values(rng, in * out, -weight_bound, weight_bound));
  layer.bias = bias_bound > 0.0
                   ? Tensor::parameter({out}, uniform_values(rng, out, -bias_bound, bias_bound))
                   : Tensor::parameter({out}, std::vector<double>(out, 0.0));
  return layer;
}

DenseLayer zero_layer(std::size_t in, std::size_t out) {
  return DenseLayer{Tensor::parameter({in, out}, std::vector<double>(in * out, 0.0)),
                    Tensor::parameter({out}, std::vector<double>(out, 0.0))};
}

void add_layer(std::vector<WeightRecord>& out, const std::string& name, const DenseLayer& l) {
  out.push_back({name + ".weight", l.weight});
  out.push_back({name + ".bias", l.bias});
}

}  // namespace

void SirenPhiConfig::validate() const {
  if (in_dim == 0 || hidden == 0 || depth == 0 || out_dim == 0) {
    throw ConfigError("phi dimensions must be positive");
  }
  if (!(omega0 > 0.0)) throw ConfigError("phi.omega0 must be positive");
}

SirenPhi SirenPhi::init_siren(std::uint64_t seed, const SirenPhiConfig& config) {
  config.validate();
  SirenPhi phi;
  phi.config_ = config;
  std::size_t fan_in = config.in_dim;
  for (std::size_t i = 0; i < config.depth; ++i) {
    const double bound = i == 0 ? 1.0 / static_cast<double>(fan_in)
                                : std::sqrt(6.0 / static_cast<double>(fan_in)) / config.omega0;
    phi.sine_layers_.push_back(
        uniform_layer(seed, "phi.siren." + std::to_string(i), fan_in, config.hidden, bound, bound));
    fan_in = config.hidden;
  }
  phi.siren_out_ = zero_layer(config.hidden, config.out_dim);

  fan_in = config.in_dim;
  for (std::size_t i = 0; i < config.depth; ++i) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    phi.relu_layers_.push_back(
        uniform_layer(seed, "phi.dnn." + std::to_string(i), fan_in, config.hidden, bound, 0.0));
    fan_in = config.hidden;
  }
  phi.dnn_out_ = zero_layer(config.hidden, config.out_dim);
  return phi;
}

SirenPhi SirenPhi::init_siren(std::uint64_t seed, std::size_t in_dim, std::size_t hidden,
                              std::size_t out_dim, double omega0) {
  SirenPhiConfig cfg;
  cfg.in_dim = in_dim;
  cfg.hidden = hidden;
  cfg.out_dim = out_dim;
  cfg.omega0 = omega0;
  return init_siren(seed, cfg);
}

void SirenPhi::check_input(const Tensor& features) const {
  if (features.rank() > 2 || features.cols() != config_.in_dim) {
    throw ShapeError("phi input " + shape_to_string(features.shape()) + " does not match width " +
                     std::to_string(config_.in_dim));
  }
}

Tensor SirenPhi::siren_branch(const Tensor& features) const {
  check_input(features);
  Tensor h = features;
  for (const auto& layer : sine_layers_) {
    h = sin(add_row(scale(matmul(h, layer.weight), config_.omega0), layer.bias));
  }
  return siren_out_.affine(h);
}

Tensor SirenPhi::dnn_branch(const Tensor& features) const {
  check_input(features);
  Tensor h = features;
  for (const auto& layer : relu_layers_) h = relu(layer.affine(h));
  return dnn_out_.affine(h);
}

Tensor SirenPhi::forward(const Tensor& features) const {
  check_input(features);
  if (config_.siren_enabled && config_.dnn_enabled) {
    return add(siren_branch(features), dnn_branch(features));
  }
  if (config_.siren_enabled) return siren_branch(features);
  if (config_.dnn_enabled) return dnn_branch(features);
  return Tensor::zeros({features.rows(), config_.out_dim});
}

std::vector<Tensor> SirenPhi::sine_preactivations(const Tensor& features) const {
  check_input(features);
  std::vector<Tensor> out;
  Tensor h = features;
  for (const auto& layer : sine_layers_) {
    Tensor pre = add_row(scale(matmul(h, layer.weight), config_.omega0), layer.bias);
    h = sin(pre);
    out.push_back(std::move(pre));
  }
  return out;
}

SirenPhi SirenPhi::with_toggles(bool siren_enabled, bool dnn_enabled) const {
  SirenPhi copy = *this;
  copy.config_.siren_enabled = siren_enabled;
  copy.config_.dnn_enabled = dnn_enabled;
  return copy;
}

std::vector<WeightRecord> SirenPhi::named_parameters(const std::string& prefix) const {
  std::vector<WeightRecord> out;
  for (std::size_t i = 0; i < sine_layers_.size(); ++i)
    add_layer(out, prefix + "siren." + std::to_string(i), sine_layers_[i]);
  add_layer(out, prefix + "siren.out", siren_out_);
  for (std::size_t i = 0; i < relu_layers_.size(); ++i)
    add_layer(out, prefix + "dnn." + std::to_string(i), relu_layers_[i]);
  add_layer(out, prefix + "dnn.out", dnn_out_);
  return out;
}

}  // namespace sirenrope
