#pragma once

// Synthetic event streams with planted temporal structure.
//
// Event times for each user are a point process on [start, start + window)
// whose intensity is modulated by daily and weekly sinusoids, conditioned on
// exactly seq_len events. Each event's label for task k is Bernoulli with
//
//   logit = bias_k + content_scale * <w_k, item>
//         + daily_amp  * sin(2 pi T / day  + phase_d_k + jitter_u)
//         + weekly_amp * sin(2 pi T / week + phase_w_k + jitter_u')
//         - recency_decay * (days since the user's previous event)
//         + noise * N(0, 1)
//
// where jitter_u, jitter_u' ~ U(-phase_jitter, phase_jitter) per user.
// Action embeddings encode the sampled labels (plus noise), so history
// carries the outcome of past events.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "sirenrope/backbone.hpp"

namespace sirenrope {

struct GeneratorSpec {
  std::size_t num_users = 2000;
  std::size_t seq_len = 64;
  std::size_t embed_dim = 32;
  std::size_t num_archetypes = 8;
  std::size_t num_tasks = 3;

  double daily_amp = 1.5;
  double weekly_amp = 1.5;
  double recency_decay = 0.2;  // logit per day of gap
  double noise = 0.3;
  double content_scale = 0.8;
  double phase_jitter = 0.5;  // radians
  double intensity_daily = 0.5;   // depth of the event-rate modulation, in [0, 1)
  double intensity_weekly = 0.3;
  double item_noise = 0.3;
  double action_noise = 0.1;

  double start_time = 1'704'067'200.0;  // Unix seconds
  double window_days = 60.0;
  double eval_fraction = 0.2;
  std::uint64_t seed = 7;

  void validate() const;
};

enum class Split { train, eval };

struct Corpus {
  std::vector<EventSequence> sequences;
  std::vector<Split> splits;  // aligned with sequences

  std::size_t size() const { return sequences.size(); }
  bool empty() const { return sequences.empty(); }
  std::size_t num_events() const;
  std::vector<EventSequence> subset(Split split) const;
  /// Earliest timestamp across all sequences (0 when empty).
  double earliest_time() const;
};

Corpus generate(const GeneratorSpec& spec);

/// Returns a copy where each sequence's timestamps are randomly permuted,
/// detaching time from labels. The result violates time ordering on purpose.
Corpus shuffle_timestamps(const Corpus& corpus, std::uint64_t seed);

// Line-delimited corpus format, one event per line, tab-separated fields:
//
//   user_id  ordinal  timestamp  item  action  labels  split
//
// item/action are comma-separated decimal floats (shortest round-trip form),
// labels are comma-separated 0/1 values, timestamp is integer seconds, split
// is "train" or "eval". Lines of one user are contiguous with ordinals
// 0, 1, 2, ... An empty corpus is an empty file.
void write_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus read_corpus(const std::filesystem::path& path);
std::string format_corpus(const Corpus& corpus);
/// `source` names the input in error messages ("<source>:<line>: ...").
Corpus parse_corpus(std::string_view text, std::string_view source = "corpus");

}  // namespace sirenrope
