#include "sirenrope/run_config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include "sirenrope/errors.hpp"
#include "sirenrope/text.hpp"

namespace sirenrope {

namespace {

struct Field {
  std::string key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define SIZE_FIELD(name, member)                                                          \
  Field {                                                                                 \
    name, [](RunConfig& c, std::string_view v) { c.member = parse_size(v, name); },       \
        [](const RunConfig& c) { return std::to_string(c.member); }                       \
  }
#define DOUBLE_FIELD(name, member)                                                        \
  Field {                                                                                 \
    name, [](RunConfig& c, std::string_view v) { c.member = parse_double(v, name); },     \
        [](const RunConfig& c) { return format_double(c.member); }                        \
  }
#define BOOL_FIELD(name, member)                                                          \
  Field {                                                                                 \
    name, [](RunConfig& c, std::string_view v) { c.member = parse_bool(v, name); },       \
        [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); }       \
  }

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v[i]);
  return out;
}

const std::vector<Field>& schema() {
  static const std::vector<Field> fields = {
      Field{"seed", [](RunConfig& c, std::string_view v) {
              const auto s = parse_int(v, "seed");
              if (s < 0) throw ConfigError("seed must be non-negative");
              c.seed = static_cast<std::uint64_t>(s);
            },
            [](const RunConfig& c) { return std::to_string(c.seed); }},
      Field{"out", [](RunConfig& c, std::string_view v) { c.out = std::string(v); },
            [](const RunConfig& c) { return c.out.string(); }},
      Field{"corpus", [](RunConfig& c, std::string_view v) { c.corpus = std::string(v); },
            [](const RunConfig& c) { return c.corpus.string(); }},
      Field{"weights", [](RunConfig& c, std::string_view v) { c.weights = std::string(v); },
            [](const RunConfig& c) { return c.weights.string(); }},

      SIZE_FIELD("data.users", generator.num_users),
      SIZE_FIELD("data.seq_len", generator.seq_len),
      SIZE_FIELD("data.archetypes", generator.num_archetypes),
      DOUBLE_FIELD("data.daily_amp", generator.daily_amp),
      DOUBLE_FIELD("data.weekly_amp", generator.weekly_amp),
      DOUBLE_FIELD("data.recency_decay", generator.recency_decay),
      DOUBLE_FIELD("data.noise", generator.noise),
      DOUBLE_FIELD("data.content_scale", generator.content_scale),
      DOUBLE_FIELD("data.phase_jitter", generator.phase_jitter),
      DOUBLE_FIELD("data.intensity_daily", generator.intensity_daily),
      DOUBLE_FIELD("data.intensity_weekly", generator.intensity_weekly),
      DOUBLE_FIELD("data.item_noise", generator.item_noise),
      DOUBLE_FIELD("data.action_noise", generator.action_noise),
      DOUBLE_FIELD("data.start_time", generator.start_time),
      DOUBLE_FIELD("data.window_days", generator.window_days),
      DOUBLE_FIELD("data.eval_fraction", generator.eval_fraction),

      SIZE_FIELD("model.layers", model.layers),
      SIZE_FIELD("model.dim", model.model_dim),
      SIZE_FIELD("model.heads", model.heads),
      SIZE_FIELD("model.tasks", model.num_tasks),
      SIZE_FIELD("model.ffn_mult", model.ffn_mult),
      DOUBLE_FIELD("model.alpha_init", model.alpha_init),
      BOOL_FIELD("model.input_projection", model.input_projection),
      Field{"model.mode",
            [](RunConfig& c, std::string_view v) { c.model.mode = parse_rotary_mode(v); },
            [](const RunConfig& c) { return std::string(to_string(c.model.mode)); }},
      DOUBLE_FIELD("rotary.base", model.base),
      BOOL_FIELD("rotary.per_layer_gates", model.per_layer_gates),
      Field{"phi.input",
            [](RunConfig& c, std::string_view v) { c.model.phi_input = parse_phi_input(v); },
            [](const RunConfig& c) { return std::string(to_string(c.model.phi_input)); }},
      SIZE_FIELD("phi.hidden", model.phi_hidden),
      SIZE_FIELD("phi.depth", model.phi_depth),
      DOUBLE_FIELD("phi.omega0", model.phi_omega0),
      BOOL_FIELD("phi.siren", model.siren_enabled),
      BOOL_FIELD("phi.dnn", model.dnn_enabled),

      DOUBLE_FIELD("train.lr", train.lr),
      DOUBLE_FIELD("train.lr_min", train.lr_min),
      SIZE_FIELD("train.batch_size", train.batch_size),
      SIZE_FIELD("train.epochs", train.epochs),
      DOUBLE_FIELD("train.beta1", train.beta1),
      DOUBLE_FIELD("train.beta2", train.beta2),
      DOUBLE_FIELD("train.eps", train.eps),
      DOUBLE_FIELD("train.time_span_days", time_span_days),
      BOOL_FIELD("train.shuffle_timestamps", shuffle_timestamps),

      Field{"sweep.kind",
            [](RunConfig& c, std::string_view v) {
              if (v != "ordinal" && v != "temporal")
                throw ConfigError("sweep.kind must be ordinal or temporal");
              c.sweep_kind = std::string(v);
            },
            [](const RunConfig& c) { return c.sweep_kind; }},
      Field{"sweep.bases",
            [](RunConfig& c, std::string_view v) {
              c.sweep_bases.clear();
              for (auto part : split(v, ',')) c.sweep_bases.push_back(parse_double(trim(part), "sweep.bases"));
            },
            [](const RunConfig& c) { return join_doubles(c.sweep_bases); }},
      SIZE_FIELD("sweep.head_dim", sweep_head_dim),
      SIZE_FIELD("sweep.max_pos", sweep_max_pos),
      Field{"sweep.span",
            [](RunConfig& c, std::string_view v) { c.sweep.span = parse_sweep_span(v); },
            [](const RunConfig& c) { return std::string(to_string(c.sweep.span)); }},
      SIZE_FIELD("sweep.resolution", sweep.resolution),
      Field{"sweep.query_time",
            [](RunConfig& c, std::string_view v) {
              if (v.empty()) c.sweep.query_time.reset();
              else c.sweep.query_time = parse_double(v, "sweep.query_time");
            },
            [](const RunConfig& c) {
              return c.sweep.query_time ? format_double(*c.sweep.query_time) : std::string();
            }},
      SIZE_FIELD("sweep.key_position", sweep.key_position),
      SIZE_FIELD("sweep.layer", sweep.layer),
      Field{"fft.span", [](RunConfig& c, std::string_view v) { c.fft_span = parse_sweep_span(v); },
            [](const RunConfig& c) { return std::string(to_string(c.fft_span)); }},
      SIZE_FIELD("fft.resolution", fft_resolution),
      DOUBLE_FIELD("fft.peak_factor", fft_peak_factor),
      Field{"heatmap.span",
            [](RunConfig& c, std::string_view v) { c.heatmap_span = parse_sweep_span(v); },
            [](const RunConfig& c) { return std::string(to_string(c.heatmap_span)); }},
      SIZE_FIELD("heatmap.resolution", heatmap_resolution),
      SIZE_FIELD("heatmap.max_ordinal", heatmap_max_ordinal),
  };
  return fields;
}

#undef SIZE_FIELD
#undef DOUBLE_FIELD
#undef BOOL_FIELD

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& f : schema()) out.push_back(f.key);
    return out;
  }();
  return names;
}

void RunConfig::set(std::string_view key, std::string_view value) {
  for (const auto& f : schema()) {
    if (f.key == key) {
      try {
        f.set(*this, value);
      } catch (const ConfigError& e) {
        throw ConfigError(std::string(key) + ": " + e.what());
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string(key) + ": " + e.what());
      }
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

void RunConfig::apply_text(std::string_view text, std::string_view source) {
  std::size_t line_no = 0;
  for (auto raw : split(text, '\n')) {
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    const auto line = trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = std::string(source) + ":" + std::to_string(line_no) + ": ";
    if (eq == std::string_view::npos) throw ConfigError(where + "expected 'key = value'");
    try {
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  apply_text(ss.str(), path.string());
}

void RunConfig::validate() const {
  generator.validate();
  model.validate();
  train.validate();
  if (!(time_span_days > 0.0)) throw ConfigError("train.time_span_days must be positive");
  if (sweep_bases.empty()) throw ConfigError("sweep.bases must not be empty");
  for (double b : sweep_bases)
    if (!(b > 1.0)) throw ConfigError("sweep.bases entries must exceed 1");
  if (sweep_head_dim == 0 || sweep_head_dim % 2 != 0) throw ConfigError("sweep.head_dim must be even");
  if (sweep_max_pos == 0) throw ConfigError("sweep.max_pos must be positive");
  if (sweep.resolution < 2 || fft_resolution < 2 || heatmap_resolution < 2) throw ConfigError("resolution must be at least 2");
  if (!(fft_peak_factor > 0.0)) throw ConfigError("fft.peak_factor must be positive");
}

std::string RunConfig::dump() const {
  std::string out;
  for (const auto& f : schema()) out += f.key + " = " + f.get(*this) + "\n";
  return out;
}

}  // namespace sirenrope
