#include "sirenrope/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "sirenrope/errors.hpp"
#include "sirenrope/rng.hpp"
#include "sirenrope/temporal.hpp"

namespace sirenrope {

void GeneratorSpec::validate() const {
  if (num_users == 0 || seq_len == 0 || embed_dim == 0 || num_archetypes == 0 || num_tasks == 0) {
    throw ConfigError("generator sizes (users, seq_len, embed_dim, archetypes, tasks) must be positive");
  }
  if (daily_amp < 0.0 || weekly_amp < 0.0) throw ConfigError("amplitudes must be >= 0");
  if (recency_decay < 0.0 || noise < 0.0 || item_noise < 0.0 || action_noise < 0.0 ||
      phase_jitter < 0.0) {
    throw ConfigError("decay, noise levels and phase jitter must be >= 0");
  }
  if (!(intensity_daily >= 0.0 && intensity_daily < 1.0) ||
      !(intensity_weekly >= 0.0 && intensity_weekly < 1.0)) {
    throw ConfigError("intensity modulation depths must lie in [0, 1)");
  }
  if (!(window_days > 0.0)) throw ConfigError("window_days must be positive");
  if (window_days * kSecondsPerDay < static_cast<double>(seq_len)) {
    throw ConfigError("window too short for seq_len distinct integer-second events");
  }
  if (!(eval_fraction >= 0.0 && eval_fraction < 1.0)) {
    throw ConfigError("eval_fraction must lie in [0, 1)");
  }
}

std::size_t Corpus::num_events() const {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.length();
  return n;
}

std::vector<EventSequence> Corpus::subset(Split split) const {
  std::vector<EventSequence> out;
  for (std::size_t i = 0; i < sequences.size(); ++i)
    if (splits[i] == split) out.push_back(sequences[i]);
  return out;
}

double Corpus::earliest_time() const {
  double t = 0.0;
  bool first = true;
  for (const auto& s : sequences)
    for (double v : s.timestamps)
      if (first || v < t) {
        t = v;
        first = false;
      }
  return t;
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct SharedDraws {
  std::vector<std::vector<double>> archetypes;    // num_archetypes x d
  std::vector<std::vector<double>> task_weights;  // num_tasks x d, unit norm
  std::vector<std::vector<double>> action_protos; // num_tasks x d
  std::vector<double> task_bias;
  std::vector<double> daily_phase, weekly_phase;  // per task
  double timing_phase_d = 0.0, timing_phase_w = 0.0;
};

std::vector<double> normal_vector(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

SharedDraws shared_draws(const GeneratorSpec& spec) {
  auto rng = make_rng(spec.seed, "shared");
  SharedDraws s;
  for (std::size_t a = 0; a < spec.num_archetypes; ++a)
    s.archetypes.push_back(normal_vector(rng, spec.embed_dim));
  std::uniform_real_distribution<double> phase(0.0, kTwoPi);
  std::uniform_real_distribution<double> bias(-0.8, 0.2);
  for (std::size_t k = 0; k < spec.num_tasks; ++k) {
    auto w = normal_vector(rng, spec.embed_dim);
    double norm = 0.0;
    for (double x : w) norm += x * x;
    norm = std::sqrt(norm);
    for (auto& x : w) x /= norm;
    s.task_weights.push_back(std::move(w));
    s.action_protos.push_back(normal_vector(rng, spec.embed_dim));
    s.task_bias.push_back(bias(rng));
    s.daily_phase.push_back(phase(rng));
    s.weekly_phase.push_back(phase(rng));
  }
  s.timing_phase_d = phase(rng);
  s.timing_phase_w = phase(rng);
  return s;
}

double timing_intensity(const GeneratorSpec& spec, const SharedDraws& s, double t) {
  return (1.0 + spec.intensity_daily * std::sin(kTwoPi * t / kSecondsPerDay + s.timing_phase_d)) *
         (1.0 + spec.intensity_weekly * std::sin(kTwoPi * t / kSecondsPerWeek + s.timing_phase_w));
}

std::vector<double> draw_times(const GeneratorSpec& spec, const SharedDraws& s,
                               std::mt19937_64& rng) {
  const double window = spec.window_days * kSecondsPerDay;
  const double max_intensity = (1.0 + spec.intensity_daily) * (1.0 + spec.intensity_weekly);
  std::uniform_real_distribution<double> offset(0.0, window);
  std::uniform_real_distribution<double> accept(0.0, max_intensity);
  std::set<double> times;
  while (times.size() < spec.seq_len) {
    const double t = std::floor(spec.start_time + offset(rng));
    if (accept(rng) <= timing_intensity(spec, s, t)) times.insert(t);
  }
  return {times.begin(), times.end()};
}

EventSequence draw_user(const GeneratorSpec& spec, const SharedDraws& s, std::uint64_t user) {
  auto rng = make_rng(spec.seed, "user/" + std::to_string(user));
  const std::size_t c = spec.seq_len, d = spec.embed_dim, tasks = spec.num_tasks;
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> any_archetype(0, spec.num_archetypes - 1);

  EventSequence seq;
  seq.user_id = user;
  seq.num_tasks = tasks;
  seq.timestamps = draw_times(spec, s, rng);

  std::vector<double> jitter_d(tasks), jitter_w(tasks);
  std::uniform_real_distribution<double> jitter(-spec.phase_jitter, spec.phase_jitter);
  const double user_jitter_d = spec.phase_jitter > 0.0 ? jitter(rng) : 0.0;
  const double user_jitter_w = spec.phase_jitter > 0.0 ? jitter(rng) : 0.0;
  const std::size_t favourite = any_archetype(rng);

  std::vector<double> items(c * d), actions(c * d);
  seq.labels.assign(c * tasks, 0.0);
  const double mean_gap_days = spec.window_days / static_cast<double>(c);
  for (std::size_t i = 0; i < c; ++i) {
    const std::size_t arch = unit(rng) < 0.5 ? favourite : any_archetype(rng);
    for (std::size_t j = 0; j < d; ++j) {
      items[i * d + j] = s.archetypes[arch][j] + spec.item_noise * gauss(rng);
    }
    const double t = seq.timestamps[i];
    const double gap_days = i == 0 ? mean_gap_days : (t - seq.timestamps[i - 1]) / kSecondsPerDay;
    for (std::size_t k = 0; k < tasks; ++k) {
      double content = 0.0;
      for (std::size_t j = 0; j < d; ++j) content += s.task_weights[k][j] * items[i * d + j];
      const double logit =
          s.task_bias[k] + spec.content_scale * content +
          spec.daily_amp * std::sin(kTwoPi * std::fmod(t, kSecondsPerDay) / kSecondsPerDay +
                                    s.daily_phase[k] + user_jitter_d) +
          spec.weekly_amp * std::sin(kTwoPi * std::fmod(t, kSecondsPerWeek) / kSecondsPerWeek +
                                     s.weekly_phase[k] + user_jitter_w) -
          spec.recency_decay * gap_days + spec.noise * gauss(rng);
      const double p = 1.0 / (1.0 + std::exp(-logit));
      seq.labels[i * tasks + k] = unit(rng) < p ? 1.0 : 0.0;
    }
    const double proto_scale = 1.0 / std::sqrt(static_cast<double>(tasks));
    for (std::size_t j = 0; j < d; ++j) {
      double a = spec.action_noise * gauss(rng);
      for (std::size_t k = 0; k < tasks; ++k) {
        a += (2.0 * seq.labels[i * tasks + k] - 1.0) * proto_scale * s.action_protos[k][j];
      }
      actions[i * d + j] = a;
    }
  }
  seq.items = Tensor::from_data({c, d}, std::move(items));
  seq.actions = Tensor::from_data({c, d}, std::move(actions));
  return seq;
}

}  // namespace

Corpus generate(const GeneratorSpec& spec) {
  spec.validate();
  const SharedDraws shared = shared_draws(spec);
  Corpus corpus;
  corpus.sequences.reserve(spec.num_users);
  for (std::size_t u = 0; u < spec.num_users; ++u) {
    corpus.sequences.push_back(draw_user(spec, shared, u));
  }
  std::vector<std::size_t> order(spec.num_users);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto rng = make_rng(spec.seed, "split");
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_eval = static_cast<std::size_t>(
      std::llround(spec.eval_fraction * static_cast<double>(spec.num_users)));
  corpus.splits.assign(spec.num_users, Split::train);
  for (std::size_t i = 0; i < n_eval; ++i) corpus.splits[order[i]] = Split::eval;
  return corpus;
}

Corpus shuffle_timestamps(const Corpus& corpus, std::uint64_t seed) {
  Corpus out = corpus;
  for (auto& seq : out.sequences) {
    auto rng = make_rng(seed, "shuffle/" + std::to_string(seq.user_id));
    std::shuffle(seq.timestamps.begin(), seq.timestamps.end(), rng);
  }
  return out;
}

}  // namespace sirenrope
