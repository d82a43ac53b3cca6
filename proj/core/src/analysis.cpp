#include "sirenrope/analysis.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "sirenrope/errors.hpp"
#include "sirenrope/text.hpp"

namespace sirenrope {

std::string_view to_string(SweepSpan span) {
  switch (span) {
    case SweepSpan::day: return "day";
    case SweepSpan::week: return "week";
    case SweepSpan::month: return "month";
    case SweepSpan::year: return "year";
  }
  return "?";
}

SweepSpan parse_sweep_span(std::string_view text) {
  if (text == "day") return SweepSpan::day;
  if (text == "week") return SweepSpan::week;
  if (text == "month") return SweepSpan::month;
  if (text == "year") return SweepSpan::year;
  throw ConfigError("unknown span '" + std::string(text) + "' (expected day, week, month, year)");
}

double span_seconds(SweepSpan span) {
  switch (span) {
    case SweepSpan::day: return kSecondsPerDay;
    case SweepSpan::week: return kSecondsPerWeek;
    case SweepSpan::month: return 30.0 * kSecondsPerDay;
    case SweepSpan::year: return 365.0 * kSecondsPerDay;
  }
  return kSecondsPerDay;
}

void SweepResult::validate() const {
  if (scores.size() != rows() * cols()) {
    throw ShapeError("sweep has " + std::to_string(scores.size()) + " scores for a " +
                     std::to_string(rows()) + " x " + std::to_string(cols()) + " grid");
  }
}

std::vector<double> unit_vector_scores(const Tensor& query_angle, const Tensor& key_angles) {
  const std::size_t planes = key_angles.cols();
  const std::size_t dk = 2 * planes;
  const std::size_t n = key_angles.rows();
  // <R_a u, R_b u> with u = 1/sqrt(d_k) equals <R_a 1, R_b 1> / d_k; the
  // all-ones form keeps the zero-offset score exactly 1.
  const Tensor q = rotate(Tensor::full({1, dk}, 1.0), reshape(query_angle, {1, planes}));
  const Tensor k = rotate(Tensor::full({n, dk}, 1.0), key_angles);
  const Tensor s = scale(matmul_nt(k, q), 1.0 / static_cast<double>(dk));
  return {s.data().begin(), s.data().end()};
}

SweepResult ordinal_sweep(double base, std::size_t head_dim, std::size_t max_pos) {
  const RotaryConfig cfg = RotaryConfig::make(RotaryMode::ordinal, base, head_dim);
  std::vector<double> positions(max_pos);
  std::iota(positions.begin(), positions.end(), 0.0);
  const std::vector<double> times(max_pos, 0.0);
  const TimeNormalization norm;
  const Tensor keys = fused_angles(cfg, positions, times, norm, nullptr);
  const Tensor query = angle(cfg, 0.0, 0.0, nullptr, norm).theta;

  SweepResult r;
  r.kind = "ordinal";
  r.span = "p" + std::to_string(max_pos);
  r.base = base;
  r.ordinals = positions;
  r.scores = unit_vector_scores(query, keys);
  return r;
}

std::vector<SweepResult> ordinal_sweeps(std::span<const double> bases, std::size_t head_dim,
                                        std::size_t max_pos) {
  std::vector<SweepResult> out;
  for (double b : bases) out.push_back(ordinal_sweep(b, head_dim, max_pos));
  return out;
}

double ordinal_closed_form(double base, std::size_t head_dim, double p) {
  const auto inv = inverse_frequencies(base, head_dim);
  double s = 0.0;
  for (double t : inv) s += std::cos(p * t);
  return s / static_cast<double>(inv.size());
}

std::vector<double> window_means(std::span<const double> values, std::size_t window) {
  if (window == 0) throw std::invalid_argument("window must be positive");
  std::vector<double> out;
  for (std::size_t start = 0; start + window <= values.size(); start += window) {
    double s = 0.0;
    for (std::size_t i = start; i < start + window; ++i) s += values[i];
    out.push_back(s / static_cast<double>(window));
  }
  return out;
}

namespace {

Tensor angles_for(const Model& model, const TimeNormalization& norm, std::size_t layer,
                  std::span<const double> positions, std::span<const double> times) {
  const auto& cfg = model.config();
  Tensor phi_out;
  if (cfg.mode == RotaryMode::siren) {
    const Tensor items = Tensor::zeros({times.size(), cfg.model_dim});
    phi_out = model.phi().forward(model.phi_features(times, items, norm));
  }
  return model.layer_angles(layer, positions, times, phi_out.defined() ? &phi_out : nullptr, norm);
}

SweepResult grid_sweep(const Model& model, const TimeNormalization& norm,
                       const TemporalSweepOptions& o, std::vector<double> ordinals,
                       const char* kind) {
  if (o.resolution < 2) throw ConfigError("sweep resolution must be at least 2");
  if (o.layer >= model.config().layers) throw ConfigError("sweep layer out of range");
  const double q_time = o.query_time.value_or(norm.t_ref);
  const double step = 2.0 * span_seconds(o.span) / static_cast<double>(o.resolution);

  SweepResult r;
  r.kind = kind;
  r.span = std::string(to_string(o.span));
  r.base = model.config().base;
  r.query_time = q_time;
  r.times.resize(o.resolution);
  for (std::size_t i = 0; i < o.resolution; ++i) r.times[i] = q_time + static_cast<double>(i) * step;
  r.ordinals = ordinals;

  const std::vector<double> q_pos{0.0}, q_t{q_time};
  const Tensor query = angles_for(model, norm, o.layer, q_pos, q_t);
  if (ordinals.empty()) ordinals.push_back(static_cast<double>(o.key_position));
  for (double p : ordinals) {
    const std::vector<double> pos(o.resolution, p);
    const auto row = unit_vector_scores(query, angles_for(model, norm, o.layer, pos, r.times));
    r.scores.insert(r.scores.end(), row.begin(), row.end());
  }
  return r;
}

}  // namespace

SweepResult temporal_sweep(const Model& model, const TimeNormalization& norm,
                           const TemporalSweepOptions& options) {
  return grid_sweep(model, norm, options, {}, "temporal");
}

SweepResult heatmap(const Model& model, const TimeNormalization& norm,
                    const TemporalSweepOptions& options, std::size_t max_ordinal) {
  std::vector<double> ordinals(max_ordinal + 1);
  std::iota(ordinals.begin(), ordinals.end(), 0.0);
  return grid_sweep(model, norm, options, std::move(ordinals), "heatmap");
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("pearson: length mismatch");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return saa == sbb ? 1.0 : 0.0;
  return sab / std::sqrt(saa * sbb);
}

double period_overlap_correlation(const SweepResult& sweep) {
  const std::size_t half = sweep.cols() / 2;
  std::span<const double> s(sweep.scores.data(), sweep.cols());
  return pearson(s.subspan(0, half), s.subspan(half, half));
}

Spectrum sweep_spectrum(const SweepResult& sweep, const SpectrumOptions& options) {
  if (sweep.times.empty() || sweep.rows() != 1)
    throw std::invalid_argument("spectrum needs a one-row temporal sweep");
  return fft_spectrum(sweep.times, sweep.scores, options);
}

std::string format_base(double base) {
  const double e = std::round(std::log10(base));
  if (e >= 0.0 && e <= 30.0 && std::pow(10.0, e) == base) {
    return "1e" + std::to_string(static_cast<int>(e));
  }
  return format_double(base);
}

std::string sweep_file_name(const SweepResult& sweep) {
  return "sweep_" + sweep.kind + "_" + sweep.span + "_" + format_base(sweep.base) + ".csv";
}

std::string spectrum_file_name(const SweepResult& sweep) {
  return "sweep_fft_" + sweep.span + "_" + format_base(sweep.base) + ".csv";
}

std::string sweep_csv(const SweepResult& sweep) {
  sweep.validate();
  std::string out;
  auto offset_days = [&](double t) { return (t - sweep.query_time) / kSecondsPerDay; };
  if (sweep.times.empty()) {
    out += "ordinal,score\n";
    for (std::size_t i = 0; i < sweep.ordinals.size(); ++i)
      out += format_double(sweep.ordinals[i]) + "," + format_double(sweep.scores[i]) + "\n";
  } else if (sweep.ordinals.empty()) {
    out += "offset_days,timestamp,score\n";
    for (std::size_t i = 0; i < sweep.times.size(); ++i) {
      out += format_double(offset_days(sweep.times[i])) + "," + format_double(sweep.times[i]) +
             "," + format_double(sweep.scores[i]) + "\n";
    }
  } else {
    out += "offset_days";
    for (double t : sweep.times) out += "," + format_double(offset_days(t));
    out += "\ntimestamp";
    for (double t : sweep.times) out += "," + format_double(t);
    out += "\n";
    for (std::size_t r = 0; r < sweep.rows(); ++r) {
      out += format_double(sweep.ordinals[r]);
      for (std::size_t c = 0; c < sweep.cols(); ++c) out += "," + format_double(sweep.at(r, c));
      out += "\n";
    }
  }
  return out;
}

std::string spectrum_csv(const Spectrum& spectrum) {
  std::string out = "frequency_cycles_per_day,magnitude\n";
  for (std::size_t i = 0; i < spectrum.frequencies.size(); ++i)
    out += format_double(spectrum.frequencies[i]) + "," + format_double(spectrum.magnitudes[i]) + "\n";
  return out;
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace sirenrope
