#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <random>

#include "sirenrope/errors.hpp"
#include "sirenrope/text.hpp"
#include "sirenrope/weights_io.hpp"

using namespace sirenrope;

TEST_CASE("format_double round-trips") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 2000; ++i) {
    const double x = u(rng) * std::pow(10.0, static_cast<double>(i % 20) - 10.0);
    CHECK(parse_double(format_double(x), "x") == x);
  }
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(1704067200.0) == "1704067200");
}

TEST_CASE("strict parsers reject partial input") {
  CHECK_THROWS_AS(parse_double("1.5x", "v"), std::invalid_argument);
  CHECK_THROWS_AS(parse_double("", "v"), std::invalid_argument);
  CHECK_THROWS_AS(parse_size("-3", "v"), std::invalid_argument);
  CHECK_THROWS_AS(parse_int("3.0", "v"), std::invalid_argument);
  CHECK_THROWS_AS(parse_bool("maybe", "v"), std::invalid_argument);
  CHECK(parse_size("42", "v") == 42);
  CHECK(parse_bool("off", "v") == false);
  CHECK(parse_double("1e6", "v") == 1e6);
  CHECK(trim("  a b \t") == "a b");
  CHECK(split("a,,b", ',').size() == 3);
}

namespace {

WeightFile sample_file() {
  WeightFile f;
  f.metadata = {{"format", "test"}, {"note", "x=1"}};
  f.records.push_back({"alpha", Tensor::from_data({1}, {0.25})});
  f.records.push_back({"w", Tensor::from_data({2, 3}, {1, -2, 3.5, 1e-300, -0.0,
                                                       std::numeric_limits<double>::max()})});
  f.records.push_back({"scalar0", Tensor::from_data({}, {7.0})});
  return f;
}

}  // namespace

TEST_CASE("weight file round-trip is lossless and ordered") {
  const WeightFile f = sample_file();
  const std::string bytes = encode_weights(f);
  CHECK(bytes.substr(0, 4) == "SRPW");
  const WeightFile g = decode_weights(bytes);
  CHECK(g.metadata == f.metadata);
  REQUIRE(g.records.size() == f.records.size());
  for (std::size_t i = 0; i < f.records.size(); ++i) {
    CHECK(g.records[i].name == f.records[i].name);
    CHECK(g.records[i].tensor.shape() == f.records[i].tensor.shape());
    const auto a = f.records[i].tensor.data(), b = g.records[i].tensor.data();
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(std::memcmp(&a[k], &b[k], sizeof(double)) == 0);
  }
  CHECK(encode_weights(g) == bytes);
  REQUIRE(g.find("w") != nullptr);
  CHECK(g.find("missing") == nullptr);

  const auto path = std::filesystem::temp_directory_path() / "sirenrope_weights_test.srpw";
  save_weights(path, f);
  CHECK(encode_weights(load_weights(path)) == bytes);
  std::filesystem::remove(path);
}

TEST_CASE("corrupt weight files are rejected") {
  const std::string bytes = encode_weights(sample_file());
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{10}, bytes.size() / 2, bytes.size() - 1}) {
    CHECK_THROWS_AS(decode_weights(bytes.substr(0, cut)), FormatError);
  }
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_weights(bad_magic), FormatError);
  std::string bad_version = bytes;
  bad_version[4] = 9;
  CHECK_THROWS_AS(decode_weights(bad_version), FormatError);
  CHECK_THROWS_AS(decode_weights(bytes + "z"), FormatError);
  CHECK_THROWS(load_weights("/nonexistent/dir/w.srpw"));
}
