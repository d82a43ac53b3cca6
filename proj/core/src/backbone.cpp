#include "sirenrope/backbone.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "sirenrope/errors.hpp"
#include "sirenrope/rng.hpp"
#include "sirenrope/text.hpp"

namespace sirenrope {

// ---------------------------------------------------------------------------
// EventSequence

Tensor EventSequence::label_matrix() const {
  return Tensor::from_data({length(), num_tasks}, labels);
}

void EventSequence::validate(bool require_ordered_time) const {
  const std::size_t c = timestamps.size();
  if (!items.defined() || !actions.defined()) throw ShapeError("sequence is missing embeddings");
  if (items.rank() != 2 || items.rows() != c) {
    throw ShapeError("items " + shape_to_string(items.shape()) + " do not match " +
                     std::to_string(c) + " timestamps");
  }
  if (actions.shape() != items.shape()) {
    throw ShapeError("actions " + shape_to_string(actions.shape()) + " vs items " +
                     shape_to_string(items.shape()));
  }
  if (labels.size() != c * num_tasks) {
    throw ShapeError("labels hold " + std::to_string(labels.size()) + " values, expected " +
                     std::to_string(c) + " x " + std::to_string(num_tasks));
  }
  for (double y : labels) {
    if (y != 0.0 && y != 1.0) throw std::invalid_argument("labels must be 0 or 1");
  }
  for (std::size_t i = 0; i < c; ++i) {
    if (!std::isfinite(timestamps[i])) throw std::invalid_argument("non-finite timestamp");
    if (require_ordered_time && i > 0 && timestamps[i] < timestamps[i - 1]) {
      throw std::invalid_argument("timestamps decrease at position " + std::to_string(i) +
                                  " of user " + std::to_string(user_id));
    }
  }
}

std::string_view to_string(PhiInput input) {
  switch (input) {
    case PhiInput::temporal: return "temporal";
    case PhiInput::scalar_time: return "scalar_time";
    case PhiInput::semantic: return "semantic";
  }
  return "unknown";
}

PhiInput parse_phi_input(std::string_view text) {
  if (text == "temporal") return PhiInput::temporal;
  if (text == "scalar_time") return PhiInput::scalar_time;
  if (text == "semantic") return PhiInput::semantic;
  throw ConfigError("unknown phi input '" + std::string(text) +
                    "' (expected temporal, scalar_time or semantic)");
}

Tensor semantic_flags(const Tensor& items) {
  const std::size_t c = items.rows(), d = items.cols();
  std::vector<double> out(c);
  for (std::size_t i = 0; i < c; ++i) out[i] = items.data()[i * d] > 0.0 ? 1.0 : 0.0;
  return Tensor::from_data({c, 1}, std::move(out));
}

// ---------------------------------------------------------------------------
// BackboneConfig

std::size_t BackboneConfig::phi_in_dim() const {
  return phi_input == PhiInput::temporal ? TemporalFeatures::kWidth : 1;
}

SirenPhiConfig BackboneConfig::phi_config() const {
  SirenPhiConfig cfg;
  cfg.in_dim = phi_in_dim();
  cfg.hidden = phi_hidden;
  cfg.depth = phi_depth;
  cfg.out_dim = head_dim() / 2;
  cfg.omega0 = phi_omega0;
  cfg.siren_enabled = siren_enabled;
  cfg.dnn_enabled = dnn_enabled;
  return cfg;
}

void BackboneConfig::validate() const {
  if (layers == 0 || model_dim == 0 || heads == 0 || num_tasks == 0 || ffn_mult == 0) {
    throw ConfigError("model sizes must be positive");
  }
  if (model_dim % heads != 0) {
    throw ConfigError("model.dim " + std::to_string(model_dim) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (head_dim() % 2 != 0) {
    throw ConfigError("head dimension " + std::to_string(head_dim()) + " must be even");
  }
  if (!(base > 1.0)) throw ConfigError("rotary.base must be > 1");
  if (!std::isfinite(alpha_init)) throw ConfigError("model.alpha_init must be finite");
  if (mode == RotaryMode::siren) phi_config().validate();
}

BackboneConfig BackboneConfig::production() {
  BackboneConfig cfg;
  cfg.layers = 12;
  cfg.model_dim = 512;
  cfg.heads = 4;
  return cfg;
}

std::map<std::string, std::string> BackboneConfig::to_metadata() const {
  return {
      {"format", "sirenrope-model"},
      {"model.layers", std::to_string(layers)},
      {"model.dim", std::to_string(model_dim)},
      {"model.heads", std::to_string(heads)},
      {"model.tasks", std::to_string(num_tasks)},
      {"model.ffn_mult", std::to_string(ffn_mult)},
      {"model.alpha_init", format_double(alpha_init)},
      {"model.input_projection", input_projection ? "true" : "false"},
      {"rotary.mode", std::string(to_string(mode))},
      {"rotary.base", format_double(base)},
      {"rotary.per_layer", per_layer_gates ? "true" : "false"},
      {"phi.input", std::string(to_string(phi_input))},
      {"phi.hidden", std::to_string(phi_hidden)},
      {"phi.depth", std::to_string(phi_depth)},
      {"phi.omega0", format_double(phi_omega0)},
      {"phi.siren_enabled", siren_enabled ? "true" : "false"},
      {"phi.dnn_enabled", dnn_enabled ? "true" : "false"},
  };
}

BackboneConfig BackboneConfig::from_metadata(const std::map<std::string, std::string>& meta) {
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = meta.find(key);
    if (it == meta.end()) throw FormatError("weight metadata lacks '" + key + "'");
    return it->second;
  };
  if (get("format") != "sirenrope-model") throw FormatError("weight file is not a sirenrope model");
  BackboneConfig cfg;
  try {
    cfg.layers = parse_size(get("model.layers"), "model.layers");
    cfg.model_dim = parse_size(get("model.dim"), "model.dim");
    cfg.heads = parse_size(get("model.heads"), "model.heads");
    cfg.num_tasks = parse_size(get("model.tasks"), "model.tasks");
    cfg.ffn_mult = parse_size(get("model.ffn_mult"), "model.ffn_mult");
    cfg.alpha_init = parse_double(get("model.alpha_init"), "model.alpha_init");
    cfg.input_projection = parse_bool(get("model.input_projection"), "model.input_projection");
    cfg.mode = parse_rotary_mode(get("rotary.mode"));
    cfg.base = parse_double(get("rotary.base"), "rotary.base");
    cfg.per_layer_gates = parse_bool(get("rotary.per_layer"), "rotary.per_layer");
    cfg.phi_input = parse_phi_input(get("phi.input"));
    cfg.phi_hidden = parse_size(get("phi.hidden"), "phi.hidden");
    cfg.phi_depth = parse_size(get("phi.depth"), "phi.depth");
    cfg.phi_omega0 = parse_double(get("phi.omega0"), "phi.omega0");
    cfg.siren_enabled = parse_bool(get("phi.siren_enabled"), "phi.siren_enabled");
    cfg.dnn_enabled = parse_bool(get("phi.dnn_enabled"), "phi.dnn_enabled");
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("weight metadata: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// Building blocks

Tensor strict_causal_mask(std::size_t length) {
  std::vector<double> m(length * length, 0.0);
  for (std::size_t n = 0; n < length; ++n)
    for (std::size_t k = 0; k < n; ++k) m[n * length + k] = 1.0;
  return Tensor::from_data({length, length}, std::move(m));
}

Tensor attention_layer(const Tensor& hidden, const Tensor& actions, const BlockParams& params,
                       const Tensor& alpha, const Tensor& angles, std::size_t heads) {
  const std::size_t c = hidden.rows(), d = hidden.cols();
  if (hidden.rank() != 2 || actions.shape() != hidden.shape()) {
    throw ShapeError("attention_layer: hidden " + shape_to_string(hidden.shape()) +
                     " and actions " + shape_to_string(actions.shape()) + " must match");
  }
  if (heads == 0 || d % heads != 0) throw ShapeError("attention_layer: bad head count");
  const std::size_t dk = d / heads;
  if (angles.rows() != c || 2 * angles.cols() != dk) {
    throw ShapeError("attention_layer: angles " + shape_to_string(angles.shape()) +
                     " do not fit " + std::to_string(c) + " positions of head width " +
                     std::to_string(dk));
  }
  const Tensor x = layer_norm_rows(hidden, params.ln1_gamma, params.ln1_beta);
  const Tensor q = matmul(x, params.wq);
  const Tensor k = matmul(x, params.wk);
  const Tensor v = matmul(add(x, mul(actions, alpha)), params.wv);
  const Tensor mask = strict_causal_mask(c);
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

  std::vector<Tensor> head_out;
  head_out.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor qh = rotate(slice_cols(q, h * dk, (h + 1) * dk), angles);
    const Tensor kh = rotate(slice_cols(k, h * dk, (h + 1) * dk), angles);
    const Tensor vh = heads == 1 ? v : slice_cols(v, h * dk, (h + 1) * dk);
    const Tensor probs = masked_softmax_rows(scale(matmul_nt(qh, kh), inv_sqrt_dk), mask);
    head_out.push_back(matmul(probs, vh));
  }
  const Tensor attended = heads == 1 ? head_out.front() : concat_cols(head_out);
  const Tensor h1 = add(hidden, matmul(attended, params.wo));
  const Tensor x2 = layer_norm_rows(h1, params.ln2_gamma, params.ln2_beta);
  const Tensor ffn = params.ffn_down.affine(relu(params.ffn_up.affine(x2)));
  return add(h1, ffn);
}

Tensor action_pool(const Tensor& final_hidden, const Tensor& items, const Tensor& actions) {
  if (final_hidden.rank() != 2 || items.shape() != final_hidden.shape() ||
      actions.rows() != final_hidden.rows()) {
    throw ShapeError("action_pool: misaligned inputs " + shape_to_string(final_hidden.shape()) +
                     ", " + shape_to_string(items.shape()) + ", " +
                     shape_to_string(actions.shape()));
  }
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(final_hidden.cols()));
  const Tensor sim = scale(matmul_nt(final_hidden, items), inv_sqrt_d);
  const Tensor probs = masked_softmax_rows(sim, strict_causal_mask(final_hidden.rows()));
  return matmul(probs, actions);
}

Tensor predict(const Tensor& head_input, const DenseLayer& head) {
  return sigmoid(head.affine(head_input));
}

// ---------------------------------------------------------------------------
// Model

namespace {

Tensor uniform_param(std::uint64_t seed, const std::string& name, Shape shape, double bound) {
  auto rng = make_rng(seed, name);
  const auto n = shape_numel(shape);
  return Tensor::parameter(std::move(shape), uniform_values(rng, n, -bound, bound));
}

double xavier(std::size_t in, std::size_t out) {
  return std::sqrt(6.0 / static_cast<double>(in + out));
}

DenseLayer dense(std::uint64_t seed, const std::string& name, std::size_t in, std::size_t out,
                 double bound) {
  return DenseLayer{uniform_param(seed, name + ".weight", {in, out}, bound),
                    Tensor::parameter({out}, std::vector<double>(out, 0.0))};
}

DenseLayer identity_layer(std::size_t d) {
  std::vector<double> w(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) w[i * d + i] = 1.0;
  return DenseLayer{Tensor::parameter({d, d}, std::move(w)),
                    Tensor::parameter({d}, std::vector<double>(d, 0.0))};
}

Tensor ones(std::size_t n) { return Tensor::parameter({n}, std::vector<double>(n, 1.0)); }
Tensor zeros_param(std::size_t n) { return Tensor::parameter({n}, std::vector<double>(n, 0.0)); }

void add_dense(std::vector<WeightRecord>& out, const std::string& name, const DenseLayer& l) {
  out.push_back({name + ".weight", l.weight});
  out.push_back({name + ".bias", l.bias});
}

}  // namespace

Model Model::init(const BackboneConfig& config, std::uint64_t seed) {
  config.validate();
  Model m;
  m.config_ = config;
  const std::size_t d = config.model_dim;
  m.alpha_ = Tensor::parameter({1}, {config.alpha_init});

  const std::size_t gate_sets = config.per_layer_gates ? config.layers : 1;
  for (std::size_t i = 0; i < gate_sets; ++i) {
    m.rotary_.push_back(RotaryConfig::make(config.mode, config.base, config.head_dim()));
  }
  if (config.mode == RotaryMode::siren) {
    m.phi_ = SirenPhi::init_siren(seed, config.phi_config());
  }
  if (config.mode == RotaryMode::timestamp_feature) {
    m.time_proj_ = dense(seed, "time_proj", TemporalFeatures::kWidth, d,
                         xavier(TemporalFeatures::kWidth, d));
  }
  if (config.input_projection) {
    m.item_proj_ = identity_layer(d);
    m.action_proj_ = identity_layer(d);
  }
  const std::size_t hidden = config.ffn_mult * d;
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::string p = "layers." + std::to_string(l) + ".";
    BlockParams b;
    b.ln1_gamma = ones(d);
    b.ln1_beta = zeros_param(d);
    b.wq = uniform_param(seed, p + "attn.wq", {d, d}, xavier(d, d));
    b.wk = uniform_param(seed, p + "attn.wk", {d, d}, xavier(d, d));
    b.wv = uniform_param(seed, p + "attn.wv", {d, d}, xavier(d, d));
    b.wo = uniform_param(seed, p + "attn.wo", {d, d}, xavier(d, d));
    b.ln2_gamma = ones(d);
    b.ln2_beta = zeros_param(d);
    b.ffn_up = dense(seed, p + "ffn.up", d, hidden, std::sqrt(6.0 / static_cast<double>(d)));
    b.ffn_down = dense(seed, p + "ffn.down", hidden, d, xavier(hidden, d));
    m.blocks_.push_back(std::move(b));
  }
  m.final_gamma_ = ones(d);
  m.final_beta_ = zeros_param(d);
  m.head_ = dense(seed, "head", 2 * d, config.num_tasks, xavier(2 * d, config.num_tasks));
  return m;
}

const RotaryConfig& Model::rotary(std::size_t layer) const {
  return rotary_.at(rotary_.size() == 1 ? 0 : layer);
}

RotaryConfig& Model::rotary(std::size_t layer) {
  return rotary_.at(rotary_.size() == 1 ? 0 : layer);
}

Tensor Model::phi_features(std::span<const double> timestamps, const Tensor& items,
                           const TimeNormalization& norm) const {
  switch (config_.phi_input) {
    case PhiInput::temporal: return temporal_feature_matrix(timestamps, norm);
    case PhiInput::scalar_time: return scalar_time_matrix(timestamps, norm);
    case PhiInput::semantic: return semantic_flags(items);
  }
  throw ConfigError("unhandled phi input");
}

Tensor Model::phi_features(const EventSequence& seq, const TimeNormalization& norm) const {
  return phi_features(seq.timestamps, seq.items, norm);
}

Tensor Model::layer_angles(std::size_t layer, std::span<const double> positions,
                           std::span<const double> timestamps, const Tensor* phi_output,
                           const TimeNormalization& norm) const {
  return fused_angles(rotary(layer), positions, timestamps, norm, phi_output);
}

Tensor Model::forward_logits(const EventSequence& seq, const TimeNormalization& norm) const {
  const std::size_t c = seq.length();
  if (c == 0) throw ShapeError("forward on an empty sequence");
  if (seq.dim() != config_.model_dim) {
    throw ShapeError("sequence embedding width " + std::to_string(seq.dim()) +
                     " does not match model.dim " + std::to_string(config_.model_dim));
  }
  Tensor items = seq.items;
  Tensor actions = seq.actions;
  if (config_.input_projection) {
    items = item_proj_.affine(items);
    actions = action_proj_.affine(actions);
  }
  Tensor hidden = items;
  if (config_.mode == RotaryMode::timestamp_feature) {
    hidden = add(hidden, time_proj_.affine(temporal_feature_matrix(seq.timestamps, norm)));
  }

  std::vector<double> positions(c);
  std::iota(positions.begin(), positions.end(), 0.0);
  Tensor phi_out;
  if (config_.mode == RotaryMode::siren) phi_out = phi_.forward(phi_features(seq, norm));
  const Tensor* phi_ptr = phi_out.defined() ? &phi_out : nullptr;

  Tensor shared_angles;
  if (rotary_.size() == 1) shared_angles = layer_angles(0, positions, seq.timestamps, phi_ptr, norm);
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const Tensor angles = rotary_.size() == 1
                              ? shared_angles
                              : layer_angles(l, positions, seq.timestamps, phi_ptr, norm);
    hidden = attention_layer(hidden, actions, blocks_[l], alpha_, angles, config_.heads);
  }
  const Tensor final_hidden = layer_norm_rows(hidden, final_gamma_, final_beta_);
  const Tensor pooled = action_pool(final_hidden, items, actions);
  return head_.affine(concat_cols({final_hidden, pooled}));
}

Tensor Model::predict_proba(const EventSequence& seq, const TimeNormalization& norm) const {
  return sigmoid(forward_logits(seq, norm));
}

std::vector<WeightRecord> Model::named_parameters() const {
  std::vector<WeightRecord> out;
  out.push_back({"alpha", alpha_});
  if (config_.mode == RotaryMode::siren) {
    for (std::size_t i = 0; i < rotary_.size(); ++i) {
      const std::string p = rotary_.size() == 1 ? "rotary." : "layers." + std::to_string(i) + ".rotary.";
      out.push_back({p + "lambda", rotary_[i].lambda});
      out.push_back({p + "omega_s", rotary_[i].omega_s});
    }
    auto phi_params = phi_.named_parameters("phi.");
    out.insert(out.end(), phi_params.begin(), phi_params.end());
  }
  if (config_.mode == RotaryMode::timestamp_feature) add_dense(out, "time_proj", time_proj_);
  if (config_.input_projection) {
    add_dense(out, "input_proj.items", item_proj_);
    add_dense(out, "input_proj.actions", action_proj_);
  }
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const std::string p = "layers." + std::to_string(l) + ".";
    const auto& b = blocks_[l];
    out.push_back({p + "ln1.gamma", b.ln1_gamma});
    out.push_back({p + "ln1.beta", b.ln1_beta});
    out.push_back({p + "attn.wq", b.wq});
    out.push_back({p + "attn.wk", b.wk});
    out.push_back({p + "attn.wv", b.wv});
    out.push_back({p + "attn.wo", b.wo});
    out.push_back({p + "ln2.gamma", b.ln2_gamma});
    out.push_back({p + "ln2.beta", b.ln2_beta});
    add_dense(out, p + "ffn.up", b.ffn_up);
    add_dense(out, p + "ffn.down", b.ffn_down);
  }
  out.push_back({"final_ln.gamma", final_gamma_});
  out.push_back({"final_ln.beta", final_beta_});
  add_dense(out, "head", head_);
  return out;
}

WeightFile Model::to_weight_file(const TimeNormalization& norm) const {
  WeightFile file;
  file.metadata = config_.to_metadata();
  file.metadata["time.t_ref"] = format_double(norm.t_ref);
  file.metadata["time.t_span"] = format_double(norm.t_span);
  for (const auto& r : named_parameters()) file.records.push_back({r.name, r.tensor.detach()});
  return file;
}

Model Model::from_weight_file(const WeightFile& file, TimeNormalization* norm) {
  const BackboneConfig config = BackboneConfig::from_metadata(file.metadata);
  Model m = Model::init(config, 0);
  const auto params = m.named_parameters();
  if (params.size() != file.records.size()) {
    throw FormatError("weight file holds " + std::to_string(file.records.size()) +
                      " tensors, model expects " + std::to_string(params.size()));
  }
  for (auto r : params) {
    const Tensor* stored = file.find(r.name);
    if (stored == nullptr) throw FormatError("weight file lacks tensor '" + r.name + "'");
    if (stored->shape() != r.tensor.shape()) {
      throw FormatError("tensor '" + r.name + "' has shape " + shape_to_string(stored->shape()) +
                        ", expected " + shape_to_string(r.tensor.shape()));
    }
    auto dst = r.tensor.mutable_data();
    const auto src = stored->data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
  if (norm != nullptr) {
    auto ref = file.metadata.find("time.t_ref");
    auto span = file.metadata.find("time.t_span");
    if (ref == file.metadata.end() || span == file.metadata.end()) {
      throw FormatError("weight metadata lacks the time normalization");
    }
    try {
      norm->t_ref = parse_double(ref->second, "time.t_ref");
      norm->t_span = parse_double(span->second, "time.t_span");
    } catch (const std::invalid_argument& e) {
      throw FormatError(std::string("weight metadata: ") + e.what());
    }
    norm->validate();
  }
  return m;
}

Model Model::clone() const { return from_weight_file(to_weight_file(TimeNormalization{})); }

}  // namespace sirenrope
