#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "sirenrope/errors.hpp"
#include "sirenrope/synthetic.hpp"
#include "sirenrope/text.hpp"

namespace sirenrope {

namespace {

void append_row(std::string& out, std::span<const double> row) {
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (j) out += ',';
    out += format_double(row[j]);
  }
}

}  // namespace

std::string format_corpus(const Corpus& corpus) {
  std::string out;
  for (std::size_t s = 0; s < corpus.sequences.size(); ++s) {
    const auto& seq = corpus.sequences[s];
    seq.validate(false);
    const std::size_t d = seq.dim();
    for (std::size_t i = 0; i < seq.length(); ++i) {
      const double t = seq.timestamps[i];
      if (t != std::floor(t)) {
        throw std::invalid_argument("corpus timestamps must be integer seconds (user " +
                                    std::to_string(seq.user_id) + ")");
      }
      out += std::to_string(seq.user_id);
      out += '\t';
      out += std::to_string(i);
      out += '\t';
      out += std::to_string(static_cast<long long>(t));
      out += '\t';
      append_row(out, seq.items.data().subspan(i * d, d));
      out += '\t';
      append_row(out, seq.actions.data().subspan(i * d, d));
      out += '\t';
      for (std::size_t k = 0; k < seq.num_tasks; ++k) {
        if (k) out += ',';
        out += seq.label(i, k) != 0.0 ? '1' : '0';
      }
      out += '\t';
      out += corpus.splits[s] == Split::eval ? "eval" : "train";
      out += '\n';
    }
  }
  return out;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  const std::string text = format_corpus(corpus);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

namespace {

struct PendingSequence {
  std::uint64_t user_id = 0;
  Split split = Split::train;
  std::size_t dim = 0;
  std::size_t tasks = 0;
  std::vector<double> items, actions, timestamps, labels;

  EventSequence finish() {
    EventSequence seq;
    seq.user_id = user_id;
    seq.num_tasks = tasks;
    const std::size_t c = timestamps.size();
    seq.items = Tensor::from_data({c, dim}, std::move(items));
    seq.actions = Tensor::from_data({c, dim}, std::move(actions));
    seq.timestamps = std::move(timestamps);
    seq.labels = std::move(labels);
    return seq;
  }
};

}  // namespace

Corpus parse_corpus(std::string_view text, std::string_view source) {
  Corpus corpus;
  PendingSequence pending;
  bool have_pending = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;

  auto flush = [&] {
    if (!have_pending) return;
    corpus.splits.push_back(pending.split);
    corpus.sequences.push_back(pending.finish());
    pending = PendingSequence{};
    have_pending = false;
  };

  while (pos < text.size()) {
    ++line_no;
    const auto end = text.find('\n', pos);
    std::string_view line = text.substr(pos, end == std::string_view::npos ? text.npos : end - pos);
    pos = end == std::string_view::npos ? text.size() : end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const std::string where = std::string(source) + ":" + std::to_string(line_no) + ": ";
    if (line.empty()) throw FormatError(where + "empty line");
    try {
      const auto fields = split(line, '\t');
      if (fields.size() != 7) {
        throw FormatError(where + "expected 7 tab-separated fields, got " +
                          std::to_string(fields.size()));
      }
      const auto user = static_cast<std::uint64_t>(parse_size(fields[0], "user_id"));
      const auto ordinal = parse_size(fields[1], "ordinal");
      const double t = static_cast<double>(parse_int(fields[2], "timestamp"));
      const auto item_parts = split(fields[3], ',');
      const auto action_parts = split(fields[4], ',');
      const auto label_parts = split(fields[5], ',');
      Split sp;
      if (fields[6] == "train") {
        sp = Split::train;
      } else if (fields[6] == "eval") {
        sp = Split::eval;
      } else {
        throw FormatError(where + "split must be 'train' or 'eval'");
      }

      if (have_pending && user != pending.user_id) flush();
      if (!have_pending) {
        if (ordinal != 0) throw FormatError(where + "user " + std::to_string(user) + " does not start at ordinal 0");
        pending.user_id = user;
        pending.split = sp;
        pending.dim = item_parts.size();
        pending.tasks = label_parts.size();
        have_pending = true;
      } else {
        if (ordinal != pending.timestamps.size()) {
          throw FormatError(where + "expected ordinal " + std::to_string(pending.timestamps.size()) +
                            ", got " + std::to_string(ordinal));
        }
        if (sp != pending.split) throw FormatError(where + "split changes within a user");
      }
      if (item_parts.size() != pending.dim || action_parts.size() != pending.dim) {
        throw FormatError(where + "embedding width differs from earlier lines of this user");
      }
      if (label_parts.size() != pending.tasks) {
        throw FormatError(where + "label count differs from earlier lines of this user");
      }
      for (auto p : item_parts) pending.items.push_back(parse_double(p, "item value"));
      for (auto p : action_parts) pending.actions.push_back(parse_double(p, "action value"));
      for (auto p : label_parts) {
        const auto y = parse_int(p, "label");
        if (y != 0 && y != 1) throw FormatError(where + "labels must be 0 or 1");
        pending.labels.push_back(static_cast<double>(y));
      }
      pending.timestamps.push_back(t);
    } catch (const std::invalid_argument& e) {
      throw FormatError(where + e.what());
    }
  }
  flush();
  return corpus;
}

Corpus read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open corpus " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_corpus(text, path.string());
}

}  // namespace sirenrope
