#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "sirenrope/trainer.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "sirenrope");
  std::ostringstream out, err;
  const int code = sirenrope::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  return lines;
}

std::size_t fields(const std::string& line) {
  return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("sirenrope_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// Small, fast model settings shared by the training tests.
const std::vector<std::string> kTiny = {"--set", "model.dim=8", "--set", "phi.hidden=8",
                                        "--set", "train.batch_size=8"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("generate writes users x seq_len events deterministically") {
  const auto dir = fresh_dir("generate");
  const auto r = run_cli({"generate", "--users", "100", "--seq-len", "64", "--seed", "7", "--out",
                          dir.string()});
  REQUIRE(r.code == 0);
  const auto first = slurp(dir / "corpus.tsv");
  CHECK(lines_of(first).size() == 6400);
  CHECK(r.out.find("events 6400") != std::string::npos);

  REQUIRE(run_cli({"generate", "--users", "100", "--seq-len", "64", "--seed", "7", "--out",
                   dir.string()}).code == 0);
  CHECK(slurp(dir / "corpus.tsv") == first);
  fs::remove_all(dir);
}

TEST_CASE("usage errors exit with code 2") {
  CHECK(run_cli({"generate", "--users", "0"}).code == 2);
  CHECK(run_cli({"generate", "--users", "many"}).code == 2);
  CHECK(run_cli({"train", "--mode", "absolute"}).code == 2);
  CHECK(run_cli({"frobnicate"}).code == 2);
  CHECK(run_cli({}).code == 2);
  CHECK(run_cli({"sweep", "--set", "no_equals"}).code == 2);
  const auto r = run_cli({"generate", "--set", "data.colour=1"});
  CHECK(r.code == 2);
  CHECK(r.err.find("data.colour") != std::string::npos);
}

TEST_CASE("config file and flag precedence") {
  const auto dir = fresh_dir("precedence");
  {
    std::ofstream f(dir / "run.cfg");
    f << "data.users = 3\ndata.seq_len = 5\nout = " << (dir / "from_file").string() << "\n";
  }
  REQUIRE(run_cli({"generate", "--config", (dir / "run.cfg").string()}).code == 0);
  CHECK(lines_of(slurp(dir / "from_file" / "corpus.tsv")).size() == 15);
  REQUIRE(run_cli({"generate", "--config", (dir / "run.cfg").string(), "--users", "2", "--out",
                   (dir / "from_flag").string()}).code == 0);
  CHECK(lines_of(slurp(dir / "from_flag" / "corpus.tsv")).size() == 10);
  CHECK(run_cli({"generate", "--config", (dir / "missing.cfg").string()}).code == 2);
  fs::remove_all(dir);
}

TEST_CASE("ordinal sweep writes four CSVs of 1024 rows") {
  const auto dir = fresh_dir("sweep");
  const auto r = run_cli({"sweep", "--kind", "ordinal", "--bases", "1e4,1e5,1e6,1e7", "--out",
                          dir.string()});
  REQUIRE(r.code == 0);
  for (const char* b : {"1e4", "1e5", "1e6", "1e7"}) {
    const auto lines = lines_of(slurp(dir / ("sweep_ordinal_p1024_" + std::string(b) + ".csv")));
    CAPTURE(b);
    REQUIRE(lines.size() == 1025);
    CHECK(lines[0] == "ordinal,score");
    CHECK(lines[1] == "0,1");
  }
  fs::remove_all(dir);
}

TEST_CASE("train, eval and analysis commands on a small corpus") {
  const auto dir = fresh_dir("pipeline");
  const auto base = std::vector<std::string>{"--out", dir.string(), "--seed", "3"};
  REQUIRE(run_cli(with(with({"generate", "--users", "12", "--seq-len", "10"}, base), kTiny)).code == 0);

  SUBCASE("siren pipeline") {
    const auto t = run_cli(with(with({"train", "--mode", "siren", "--epochs", "1"}, base), kTiny));
    REQUIRE(t.code == 0);
    CHECK(fs::exists(dir / "weights.srpw"));
    const auto metrics = lines_of(slurp(dir / "metrics.jsonl"));
    REQUIRE(metrics.size() == 2);
    CHECK(metrics[1].find("\"lambda\":") != std::string::npos);
    CHECK(fs::exists(dir / "run_config.txt"));

    const auto e = run_cli(with({"eval"}, base));
    REQUIRE(e.code == 0);
    CHECK(slurp(dir / "eval.json").find("\"tasks\"") != std::string::npos);

    const auto h = run_cli(with({"heatmap", "--span", "week", "--resolution", "30"}, base));
    REQUIRE(h.code == 0);
    const auto grid = lines_of(slurp(dir / "sweep_heatmap_week_1e6.csv"));
    REQUIRE(grid.size() == 2 + 121);
    CHECK(grid[0].rfind("offset_days,", 0) == 0);
    CHECK(grid[1].rfind("timestamp,", 0) == 0);
    for (std::size_t i = 2; i < grid.size(); ++i) CHECK(fields(grid[i]) == 31);

    const auto f = run_cli(with({"fft", "--span", "year", "--resolution", "256"}, base));
    REQUIRE(f.code == 0);
    const auto spec = lines_of(slurp(dir / "sweep_fft_year_1e6.csv"));
    REQUIRE(spec.size() == 1 + 129);
    CHECK(spec[0] == "frequency_cycles_per_day,magnitude");
    CHECK(lines_of(slurp(dir / "sweep_temporal_year_1e6.csv")).size() == 257);

    const auto s = run_cli(with({"sweep", "--span", "day", "--resolution", "16"}, base));
    REQUIRE(s.code == 0);
    CHECK(lines_of(slurp(dir / "sweep_temporal_day_1e6.csv")).size() == 17);
  }

  SUBCASE("ordinal reports carry no lambda") {
    REQUIRE(run_cli(with(with({"train", "--mode", "ordinal", "--epochs", "1"}, base), kTiny)).code == 0);
    CHECK(slurp(dir / "metrics.jsonl").find("lambda") == std::string::npos);
  }

  SUBCASE("zero epochs report the untrained model") {
    REQUIRE(run_cli(with(with({"train", "--mode", "siren", "--epochs", "0"}, base), kTiny)).code == 0);
    const auto metrics = lines_of(slurp(dir / "metrics.jsonl"));
    REQUIRE(metrics.size() == 1);
    CHECK(metrics[0].rfind("{\"epoch\":0,", 0) == 0);
    CHECK(metrics[0].find("\"lambda\":1.0") != std::string::npos);
  }

  SUBCASE("training reruns are byte identical") {
    const auto args = with(with({"train", "--mode", "siren", "--epochs", "1"}, base), kTiny);
    REQUIRE(run_cli(args).code == 0);
    const auto w = slurp(dir / "weights.srpw");
    const auto m = slurp(dir / "metrics.jsonl");
    REQUIRE(run_cli(args).code == 0);
    CHECK(slurp(dir / "weights.srpw") == w);
    CHECK(slurp(dir / "metrics.jsonl") == m);
  }

  SUBCASE("corrupt or missing weights are reported") {
    {
      std::ofstream f(dir / "weights.srpw", std::ios::binary);
      f << "not a weight file";
    }
    const auto r = run_cli(with({"eval"}, base));
    CHECK(r.code == 1);
    CHECK(r.err.find("weights.srpw") != std::string::npos);
    fs::remove(dir / "weights.srpw");
    CHECK(run_cli(with({"fft"}, base)).code == 1);
  }

  SUBCASE("missing corpus is reported") {
    fs::remove(dir / "corpus.tsv");
    const auto r = run_cli(with({"train"}, base));
    CHECK(r.code == 1);
    CHECK(r.err.find("corpus") != std::string::npos);
  }
  fs::remove_all(dir);
}
