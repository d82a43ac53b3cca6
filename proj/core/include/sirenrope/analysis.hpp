#pragma once

// Attention-score sweeps over rotary angles.
//
// Every score is the dot product of a rotated query and a rotated key, both
// the constant vector 1/sqrt(d_k), so zero offset gives exactly 1 and
//   score = (1 / (d_k/2)) * sum_j cos(angle_key_j - angle_query_j).
// The query sits at ordinal 0 and (for temporal sweeps) at `query_time`.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sirenrope/backbone.hpp"
#include "sirenrope/fft.hpp"

namespace sirenrope {

enum class SweepSpan { day, week, month, year };

std::string_view to_string(SweepSpan span);
SweepSpan parse_sweep_span(std::string_view text);
/// day, week, 30 days, 365 days.
double span_seconds(SweepSpan span);

struct SweepResult {
  std::string kind;  // "ordinal", "temporal" or "heatmap"
  std::string span;  // span name, or "p<max>" for ordinal sweeps
  double base = 0.0;
  std::vector<double> ordinals;  // key ordinal axis (rows); empty for temporal
  std::vector<double> times;     // key timestamps in seconds (columns); empty for ordinal
  double query_time = 0.0;
  std::vector<double> scores;    // row-major rows x cols

  std::size_t rows() const { return ordinals.empty() ? 1 : ordinals.size(); }
  std::size_t cols() const { return times.empty() ? 1 : times.size(); }
  double at(std::size_t row, std::size_t col) const { return scores[row * cols() + col]; }
  void validate() const;
};

/// Scores of a query at the first angle row against every key angle row.
std::vector<double> unit_vector_scores(const Tensor& query_angle, const Tensor& key_angles);

SweepResult ordinal_sweep(double base, std::size_t head_dim, std::size_t max_pos);
std::vector<SweepResult> ordinal_sweeps(std::span<const double> bases, std::size_t head_dim,
                                        std::size_t max_pos);

/// (1/(d_k/2)) * sum_j cos(p * theta_j).
double ordinal_closed_form(double base, std::size_t head_dim, double p);

/// Means of consecutive non-overlapping windows.
std::vector<double> window_means(std::span<const double> values, std::size_t window);

struct TemporalSweepOptions {
  SweepSpan span = SweepSpan::day;
  std::size_t resolution = 2048;      // samples across two periods, end excluded
  std::optional<double> query_time;   // defaults to the normalization reference
  std::size_t key_position = 0;
  std::size_t layer = 0;
};

/// Key timestamps gridded uniformly over two consecutive periods.
SweepResult temporal_sweep(const Model& model, const TimeNormalization& norm,
                           const TemporalSweepOptions& options);

/// Rows are key ordinals 0..max_ordinal, columns the temporal grid.
SweepResult heatmap(const Model& model, const TimeNormalization& norm,
                    const TemporalSweepOptions& options, std::size_t max_ordinal = 120);

/// Pearson correlation of the first and second half of a temporal sweep.
double period_overlap_correlation(const SweepResult& sweep);
double pearson(std::span<const double> a, std::span<const double> b);

Spectrum sweep_spectrum(const SweepResult& sweep, const SpectrumOptions& options = {});

/// "1e4" for exact powers of ten, otherwise the shortest decimal form.
std::string format_base(double base);
std::string sweep_file_name(const SweepResult& sweep);
std::string spectrum_file_name(const SweepResult& sweep);

std::string sweep_csv(const SweepResult& sweep);
std::string spectrum_csv(const Spectrum& spectrum);

/// Writes bytes to path, creating parent directories.
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace sirenrope
