#pragma once

// Resolved settings for one command-line run.
//
// Files hold one `key = value` pair per line; '#' starts a comment. Every
// key must appear in the schema returned by RunConfig::keys(). Values are
// applied in order: defaults, then the file, then command-line overrides.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "sirenrope/analysis.hpp"
#include "sirenrope/backbone.hpp"
#include "sirenrope/synthetic.hpp"
#include "sirenrope/trainer.hpp"

namespace sirenrope {

struct RunConfig {
  std::uint64_t seed = 7;
  std::filesystem::path out = "out";
  std::filesystem::path corpus;
  std::filesystem::path weights;

  GeneratorSpec generator;
  BackboneConfig model;
  TrainConfig train;
  double time_span_days = 365.25;
  bool shuffle_timestamps = false;

  std::string sweep_kind = "temporal";  // ordinal or temporal
  std::vector<double> sweep_bases{1e4, 1e5, 1e6, 1e7};
  std::size_t sweep_head_dim = 512;
  std::size_t sweep_max_pos = 1024;
  TemporalSweepOptions sweep;  // span/resolution for the temporal sweep command
  SweepSpan fft_span = SweepSpan::year;
  std::size_t fft_resolution = 4096;
  double fft_peak_factor = 3.0;
  SweepSpan heatmap_span = SweepSpan::week;
  std::size_t heatmap_resolution = 240;
  std::size_t heatmap_max_ordinal = 120;

  /// Sets one schema key from its text form. Throws ConfigError naming the
  /// key for unknown keys or unparsable values.
  void set(std::string_view key, std::string_view value);
  /// Applies a config file; errors carry "<path>:<line>:".
  void load_file(const std::filesystem::path& path);
  void apply_text(std::string_view text, std::string_view source);
  void validate() const;

  static const std::vector<std::string>& keys();
  /// Canonical `key = value` dump of every schema key.
  std::string dump() const;
};

}  // namespace sirenrope
