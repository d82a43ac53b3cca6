#pragma once

// Toy-scale AttnMVP backbone.
//
// Item embeddings drive queries and keys; action embeddings enter only the
// value stream (V = LN(H) + alpha * A). Attention is strictly causal: the
// query at position n sees keys 0..n-1, never itself, so the action of event
// n cannot leak into its own prediction. After the last layer, historical
// actions are pooled by item similarity and concatenated with the final
// hidden state before a per-task sigmoid head.
//
// Implementation-defined pieces (shared by every rotary mode):
//   * pre-LN blocks: x + Attn(LN(x)), then x + FFN(LN(x));
//   * FFN is Linear(d, ffn_mult*d) -> ReLU -> Linear(ffn_mult*d, d);
//   * one final LN before pooling and the head;
//   * the head is a single linear map from 2d to num_tasks logits.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sirenrope/rotary.hpp"
#include "sirenrope/siren_phi.hpp"
#include "sirenrope/temporal.hpp"
#include "sirenrope/tensor.hpp"
#include "sirenrope/weights_io.hpp"

namespace sirenrope {

/// One user history. Rows of items/actions/labels are aligned with
/// timestamps; labels are 0/1 stored row-major as C x num_tasks.
struct EventSequence {
  std::uint64_t user_id = 0;
  Tensor items;    // C x d
  Tensor actions;  // C x d
  std::vector<double> timestamps;
  std::size_t num_tasks = 0;
  std::vector<double> labels;

  std::size_t length() const { return timestamps.size(); }
  std::size_t dim() const { return items.cols(); }
  double label(std::size_t position, std::size_t task) const {
    return labels[position * num_tasks + task];
  }
  Tensor label_matrix() const;
  /// Throws ShapeError / std::invalid_argument on violated invariants.
  /// `require_ordered_time` checks non-decreasing timestamps.
  void validate(bool require_ordered_time = true) const;
};

/// What the angle network consumes in siren mode.
enum class PhiInput {
  temporal,     // 5-wide cyclical decomposition
  scalar_time,  // normalized offset only
  semantic,     // binary per-event flag derived from the item embedding
};

std::string_view to_string(PhiInput input);
PhiInput parse_phi_input(std::string_view text);

/// 1.0 when the first item coordinate is positive, else 0.0 (C x 1).
Tensor semantic_flags(const Tensor& items);

struct BackboneConfig {
  std::size_t layers = 2;
  std::size_t model_dim = 32;
  std::size_t heads = 2;
  std::size_t num_tasks = 3;
  std::size_t ffn_mult = 4;
  double alpha_init = 1.0;
  bool input_projection = false;

  RotaryMode mode = RotaryMode::ordinal;
  double base = 1e6;
  bool per_layer_gates = false;

  PhiInput phi_input = PhiInput::temporal;
  std::size_t phi_hidden = 64;
  std::size_t phi_depth = 2;
  double phi_omega0 = 30.0;
  bool siren_enabled = true;
  bool dnn_enabled = true;

  std::size_t head_dim() const { return model_dim / heads; }
  std::size_t phi_in_dim() const;
  SirenPhiConfig phi_config() const;
  void validate() const;

  /// 12 layers, d = 512, 4 heads.
  static BackboneConfig production();

  std::map<std::string, std::string> to_metadata() const;
  static BackboneConfig from_metadata(const std::map<std::string, std::string>& meta);
};

struct BlockParams {
  Tensor ln1_gamma, ln1_beta;
  Tensor wq, wk, wv, wo;  // d x d
  Tensor ln2_gamma, ln2_beta;
  DenseLayer ffn_up, ffn_down;
};

/// C x C with 1 where key m < query n.
Tensor strict_causal_mask(std::size_t length);

/// One pre-LN block. `angles` is C x d_k/2 and is shared by all heads.
Tensor attention_layer(const Tensor& hidden, const Tensor& actions, const BlockParams& params,
                       const Tensor& alpha, const Tensor& angles, std::size_t heads);

/// For each n: softmax_m<n( <h_n, item_m> / sqrt(d) ) weighted sum of
/// actions[m]; row 0 pools to zero.
Tensor action_pool(const Tensor& final_hidden, const Tensor& items, const Tensor& actions);

/// Per-task probabilities sigmoid(x W + b).
Tensor predict(const Tensor& head_input, const DenseLayer& head);

class Model {
 public:
  static Model init(const BackboneConfig& config, std::uint64_t seed);

  const BackboneConfig& config() const { return config_; }

  Tensor forward_logits(const EventSequence& seq, const TimeNormalization& norm) const;
  Tensor predict_proba(const EventSequence& seq, const TimeNormalization& norm) const;

  /// Angle-network input rows for a sequence (siren mode).
  Tensor phi_features(const EventSequence& seq, const TimeNormalization& norm) const;
  Tensor phi_features(std::span<const double> timestamps, const Tensor& items,
                      const TimeNormalization& norm) const;
  /// C x d_k/2 angles used by `layer`.
  Tensor layer_angles(std::size_t layer, std::span<const double> positions,
                      std::span<const double> timestamps, const Tensor* phi_output,
                      const TimeNormalization& norm) const;

  /// Trainable parameters in a fixed order; mode-specific entries (lambda,
  /// omega_s, phi, time projection) appear only where the mode uses them.
  std::vector<WeightRecord> named_parameters() const;

  const RotaryConfig& rotary(std::size_t layer = 0) const;
  RotaryConfig& rotary(std::size_t layer = 0);
  const SirenPhi& phi() const { return phi_; }
  SirenPhi& phi() { return phi_; }
  const Tensor& alpha() const { return alpha_; }
  std::vector<BlockParams>& blocks() { return blocks_; }
  DenseLayer& head() { return head_; }

  WeightFile to_weight_file(const TimeNormalization& norm) const;
  /// Rebuilds a model from a weight file; the stored normalization is
  /// written to `norm` when non-null.
  static Model from_weight_file(const WeightFile& file, TimeNormalization* norm = nullptr);

  /// Deep copy with independent parameter storage.
  Model clone() const;

 private:
  BackboneConfig config_;
  Tensor alpha_;
  std::vector<RotaryConfig> rotary_;  // one entry, or one per layer
  SirenPhi phi_;
  DenseLayer time_proj_;
  DenseLayer item_proj_, action_proj_;
  std::vector<BlockParams> blocks_;
  Tensor final_gamma_, final_beta_;
  DenseLayer head_;
};

}  // namespace sirenrope
