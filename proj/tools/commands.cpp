#include "commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "sirenrope/analysis.hpp"
#include "sirenrope/errors.hpp"
#include "sirenrope/run_config.hpp"
#include "sirenrope/synthetic.hpp"
#include "sirenrope/text.hpp"
#include "sirenrope/trainer.hpp"
#include "sirenrope/weights_io.hpp"

namespace sirenrope::cli {

namespace {

namespace fs = std::filesystem;

using Overrides = std::vector<std::pair<std::string, std::string>>;

struct Common {
  std::string config;
  Overrides overrides;
};

void add_value(CLI::App* sub, Common& c, const std::string& flag, const std::string& key,
               const std::string& help) {
  sub->add_option_function<std::string>(
      flag, [&c, key](const std::string& v) { c.overrides.emplace_back(key, v); }, help);
}

void add_switch(CLI::App* sub, Common& c, const std::string& flag, const std::string& key,
                const std::string& value, const std::string& help) {
  sub->add_flag_function(
      flag, [&c, key, value](std::int64_t) { c.overrides.emplace_back(key, value); }, help);
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "key = value config file");
  add_value(sub, c, "--seed", "seed", "random seed");
  add_value(sub, c, "--out", "out", "output directory");
  add_value(sub, c, "--corpus", "corpus", "corpus file");
  add_value(sub, c, "--weights", "weights", "weight file");
  sub->add_option_function<std::vector<std::string>>(
      "--set",
      [&c](const std::vector<std::string>& items) {
        for (const auto& item : items) {
          const auto eq = item.find('=');
          if (eq == std::string::npos) throw CLI::ValidationError("--set", "expected key=value");
          c.overrides.emplace_back(std::string(trim(std::string_view(item).substr(0, eq))),
                                   std::string(trim(std::string_view(item).substr(eq + 1))));
        }
      },
      "override any config key (key=value)");
}

RunConfig resolve(const Common& c) {
  RunConfig cfg;
  if (const char* root = std::getenv(kOutputEnv); root != nullptr && *root != '\0') cfg.out = root;
  if (!c.config.empty()) cfg.load_file(c.config);
  for (const auto& [k, v] : c.overrides) cfg.set(k, v);
  cfg.validate();
  return cfg;
}

fs::path corpus_path(const RunConfig& cfg) {
  return cfg.corpus.empty() ? cfg.out / "corpus.tsv" : cfg.corpus;
}

fs::path weights_path(const RunConfig& cfg) {
  return cfg.weights.empty() ? cfg.out / "weights.srpw" : cfg.weights;
}

std::string read_bytes(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Written bytes are read back and compared before a command reports success.
void write_verified(const fs::path& path, const std::string& bytes) {
  write_text_file(path, bytes);
  if (read_bytes(path) != bytes) throw std::runtime_error("verification failed for " + path.string());
}

Corpus load_corpus(const RunConfig& cfg) {
  const fs::path path = corpus_path(cfg);
  if (!fs::exists(path)) throw std::runtime_error("corpus not found: " + path.string());
  return read_corpus(path);
}

Model load_model(const RunConfig& cfg, TimeNormalization& norm) {
  const fs::path path = weights_path(cfg);
  if (!fs::exists(path)) throw std::runtime_error("weight file not found: " + path.string());
  try {
    return Model::from_weight_file(load_weights(path), &norm);
  } catch (const std::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

nlohmann::ordered_json metrics_json(const std::vector<TaskMetrics>& tasks) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& t : tasks) arr.push_back({{"ne", t.ne}, {"auc", t.auc}});
  return arr;
}

void print_metrics(std::ostream& out, const std::vector<TaskMetrics>& tasks) {
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    out << "  task " << k << ": NE " << format_double(tasks[k].ne) << "  AUC "
        << format_double(tasks[k].auc) << "\n";
  }
}

int cmd_generate(const RunConfig& cfg, std::ostream& out) {
  GeneratorSpec spec = cfg.generator;
  spec.seed = cfg.seed;
  spec.embed_dim = cfg.model.model_dim;
  spec.num_tasks = cfg.model.num_tasks;
  const Corpus corpus = generate(spec);
  const fs::path path = corpus_path(cfg);
  write_verified(path, format_corpus(corpus));

  std::vector<double> positives(spec.num_tasks, 0.0);
  std::size_t train_users = 0;
  for (std::size_t u = 0; u < corpus.size(); ++u) {
    if (corpus.splits[u] == Split::train) ++train_users;
    const auto& seq = corpus.sequences[u];
    for (std::size_t i = 0; i < seq.length(); ++i)
      for (std::size_t k = 0; k < spec.num_tasks; ++k) positives[k] += seq.label(i, k);
  }
  out << "wrote " << path.string() << "\n";
  out << "users " << corpus.size() << " (train " << train_users << ", eval "
      << corpus.size() - train_users << "), events " << corpus.num_events() << "\n";
  for (std::size_t k = 0; k < spec.num_tasks; ++k) {
    out << "  task " << k << " base rate "
        << format_double(positives[k] / static_cast<double>(corpus.num_events())) << "\n";
  }
  return 0;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  Corpus corpus = load_corpus(cfg);
  if (corpus.empty()) throw std::runtime_error("corpus is empty");
  if (cfg.shuffle_timestamps) corpus = shuffle_timestamps(corpus, cfg.seed);
  const auto& first = corpus.sequences.front();
  if (first.dim() != cfg.model.model_dim || first.num_tasks != cfg.model.num_tasks) {
    throw ConfigError("corpus has dim " + std::to_string(first.dim()) + " and " +
                      std::to_string(first.num_tasks) + " tasks; model.dim/model.tasks disagree");
  }
  TimeNormalization norm;
  norm.t_ref = corpus.earliest_time();
  norm.t_span = cfg.time_span_days * kSecondsPerDay;

  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  const auto train_set = corpus.subset(Split::train);
  const auto eval_set = corpus.subset(Split::eval);
  std::string jsonl;
  auto result = train(Model::init(cfg.model, cfg.seed), train_set, eval_set, norm, tc,
                      [&](const EpochRecord& r) {
                        jsonl += to_json_line(r) + "\n";
                        out << "epoch " << r.epoch << " loss " << format_double(r.train_loss);
                        if (r.lambda) out << " lambda " << format_double(*r.lambda);
                        out << "\n";
                      });

  const fs::path wpath = weights_path(cfg);
  const std::string bytes = encode_weights(result.model.to_weight_file(norm));
  write_verified(wpath, bytes);
  decode_weights(read_bytes(wpath));
  write_verified(cfg.out / "metrics.jsonl", jsonl);
  write_verified(cfg.out / "run_config.txt", cfg.dump());

  out << "wrote " << wpath.string() << " and " << (cfg.out / "metrics.jsonl").string() << "\n";
  if (!result.report.final_record().eval.empty()) {
    out << "eval metrics:\n";
    print_metrics(out, result.report.final_record().eval);
  }
  return 0;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out) {
  TimeNormalization norm;
  const Model model = load_model(cfg, norm);
  const Corpus corpus = load_corpus(cfg);
  auto sequences = corpus.subset(Split::eval);
  std::string split = "eval";
  if (sequences.empty()) {
    sequences = corpus.sequences;
    split = "all";
  }
  if (sequences.empty()) throw std::runtime_error("corpus is empty");
  const auto tasks = evaluate(model, sequences, norm);
  nlohmann::ordered_json j;
  j["split"] = split;
  j["sequences"] = sequences.size();
  j["loss"] = mean_loss(model, sequences, norm);
  j["tasks"] = metrics_json(tasks);
  if (model.config().mode == RotaryMode::siren) j["lambda"] = model.rotary(0).lambda.item();
  const fs::path path = cfg.out / "eval.json";
  write_verified(path, j.dump(2) + "\n");
  out << "evaluated " << sequences.size() << " " << split << " sequences\n";
  print_metrics(out, tasks);
  out << "wrote " << path.string() << "\n";
  return 0;
}

int cmd_sweep(const RunConfig& cfg, std::ostream& out) {
  std::vector<SweepResult> sweeps;
  if (cfg.sweep_kind == "ordinal") {
    sweeps = ordinal_sweeps(cfg.sweep_bases, cfg.sweep_head_dim, cfg.sweep_max_pos);
  } else {
    TimeNormalization norm;
    const Model model = load_model(cfg, norm);
    sweeps.push_back(temporal_sweep(model, norm, cfg.sweep));
  }
  for (const auto& s : sweeps) {
    const fs::path path = cfg.out / sweep_file_name(s);
    write_verified(path, sweep_csv(s));
    out << "wrote " << path.string() << " (" << s.scores.size() << " rows)\n";
  }
  return 0;
}

int cmd_fft(const RunConfig& cfg, std::ostream& out) {
  TimeNormalization norm;
  const Model model = load_model(cfg, norm);
  TemporalSweepOptions opts = cfg.sweep;
  opts.span = cfg.fft_span;
  opts.resolution = cfg.fft_resolution;
  const SweepResult sweep = temporal_sweep(model, norm, opts);
  const Spectrum spectrum = sweep_spectrum(sweep);
  const fs::path sweep_file = cfg.out / sweep_file_name(sweep);
  const fs::path spec_file = cfg.out / spectrum_file_name(sweep);
  write_verified(sweep_file, sweep_csv(sweep));
  write_verified(spec_file, spectrum_csv(spectrum));
  out << "wrote " << sweep_file.string() << " and " << spec_file.string() << "\n";
  out << "bin width " << format_double(spectrum.bin_width()) << " cycles/day, median magnitude "
      << format_double(median_magnitude(spectrum)) << "\n";
  const auto peaks = find_peaks(spectrum, cfg.fft_peak_factor);
  out << peaks.size() << " peaks >= " << format_double(cfg.fft_peak_factor) << "x median";
  const std::size_t shown = std::min<std::size_t>(peaks.size(), 10);
  for (std::size_t i = 0; i < shown; ++i) {
    out << (i == 0 ? ": " : ", ") << format_double(peaks[i].frequency);
  }
  out << "\n";
  return 0;
}

int cmd_heatmap(const RunConfig& cfg, std::ostream& out) {
  TimeNormalization norm;
  const Model model = load_model(cfg, norm);
  TemporalSweepOptions opts = cfg.sweep;
  opts.span = cfg.heatmap_span;
  opts.resolution = cfg.heatmap_resolution;
  const SweepResult grid = heatmap(model, norm, opts, cfg.heatmap_max_ordinal);
  const fs::path path = cfg.out / sweep_file_name(grid);
  write_verified(path, sweep_csv(grid));
  out << "wrote " << path.string() << " (" << grid.rows() << " x " << grid.cols() << ")\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"sirenrope: rotary position experiments on synthetic event streams"};
  app.require_subcommand(1);
  Common common;

  auto* gen = app.add_subcommand("generate", "write a synthetic corpus");
  add_common(gen, common);
  add_value(gen, common, "--users", "data.users", "number of users");
  add_value(gen, common, "--seq-len", "data.seq_len", "events per user");
  add_value(gen, common, "--daily-amp", "data.daily_amp", "daily label amplitude");
  add_value(gen, common, "--weekly-amp", "data.weekly_amp", "weekly label amplitude");

  auto* tr = app.add_subcommand("train", "train a model on a corpus");
  add_common(tr, common);
  add_value(tr, common, "--mode", "model.mode", "ordinal, ts-feature, to-rope or siren");
  add_value(tr, common, "--epochs", "train.epochs", "training epochs");
  add_value(tr, common, "--lr", "train.lr", "peak learning rate");
  add_switch(tr, common, "--no-siren-branch", "phi.siren", "false", "disable the sine branch");
  add_switch(tr, common, "--no-dnn-branch", "phi.dnn", "false", "disable the ReLU branch");
  add_switch(tr, common, "--scalar-time-only", "phi.input", "scalar_time",
             "feed only the normalized time offset to the angle network");
  add_switch(tr, common, "--semantic-input", "phi.input", "semantic",
             "feed a per-event content flag to the angle network");
  add_switch(tr, common, "--shuffle-timestamps", "train.shuffle_timestamps", "true",
             "permute timestamps within each sequence before training");

  auto* ev = app.add_subcommand("eval", "evaluate saved weights on a corpus");
  add_common(ev, common);

  auto* sw = app.add_subcommand("sweep", "attention-score sweeps");
  add_common(sw, common);
  add_value(sw, common, "--kind", "sweep.kind", "ordinal or temporal");
  add_value(sw, common, "--bases", "sweep.bases", "comma-separated bases (ordinal)");
  add_value(sw, common, "--span", "sweep.span", "day, week, month or year (temporal)");
  add_value(sw, common, "--resolution", "sweep.resolution", "grid points over two periods");
  add_value(sw, common, "--query-time", "sweep.query_time", "query timestamp, Unix seconds");

  auto* ff = app.add_subcommand("fft", "spectrum of a temporal sweep");
  add_common(ff, common);
  add_value(ff, common, "--span", "fft.span", "day, week, month or year");
  add_value(ff, common, "--resolution", "fft.resolution", "grid points over two periods");
  add_value(ff, common, "--query-time", "sweep.query_time", "query timestamp, Unix seconds");

  auto* hm = app.add_subcommand("heatmap", "ordinal x time attention grid");
  add_common(hm, common);
  add_value(hm, common, "--span", "heatmap.span", "day, week, month or year");
  add_value(hm, common, "--resolution", "heatmap.resolution", "time grid points");
  add_value(hm, common, "--query-time", "sweep.query_time", "query timestamp, Unix seconds");

  std::vector<std::string> argv;
  for (std::size_t i = args.size(); i > 1; --i) argv.push_back(args[i - 1]);
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, er;
    const int code = app.exit(e, o, er);
    out << o.str();
    err << er.str();
    return code == 0 ? 0 : 2;
  }

  RunConfig cfg;
  try {
    cfg = resolve(common);
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_generate(cfg, out);
    if (tr->parsed()) return cmd_train(cfg, out);
    if (ev->parsed()) return cmd_eval(cfg, out);
    if (sw->parsed()) return cmd_sweep(cfg, out);
    if (ff->parsed()) return cmd_fft(cfg, out);
    if (hm->parsed()) return cmd_heatmap(cfg, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace sirenrope::cli
