#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "sirenrope/errors.hpp"
#include "sirenrope/rotary.hpp"
#include "test_util.hpp"

using namespace sirenrope;
using sirenrope::testing::grad_check;
using sirenrope::testing::random_tensor;

namespace {

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += a[i] * b[i];
  return s;
}

Tensor angles_of(const std::vector<double>& v) { return Tensor::from_data({v.size()}, v); }

}  // namespace

TEST_CASE("inverse frequencies") {
  const auto f = inverse_frequencies(1e4, 4);
  REQUIRE(f.size() == 2);
  CHECK(f[0] == 1.0);
  CHECK(f[1] == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(inverse_frequencies(1e6, 2) == std::vector<double>{1.0});
  const auto g = inverse_frequencies(1e4, 8);
  for (std::size_t j = 0; j < g.size(); ++j) {
    CHECK(g[j] == doctest::Approx(std::exp(-2.0 * static_cast<double>(j) * std::log(1e4) / 8.0)).epsilon(1e-14));
  }
  CHECK_THROWS_AS(inverse_frequencies(1e4, 3), ConfigError);
  CHECK_THROWS_AS(inverse_frequencies(1.0, 4), ConfigError);
  CHECK_THROWS_AS(RotaryConfig::make(RotaryMode::siren, 0.5, 8), ConfigError);
}

TEST_CASE("mode names") {
  CHECK(parse_rotary_mode("ordinal") == RotaryMode::ordinal);
  CHECK(parse_rotary_mode("ts-feature") == RotaryMode::timestamp_feature);
  CHECK(parse_rotary_mode("timestamp_feature") == RotaryMode::timestamp_feature);
  CHECK(parse_rotary_mode("to-rope") == RotaryMode::to_rope);
  CHECK(parse_rotary_mode("siren") == RotaryMode::siren);
  CHECK_THROWS_AS(parse_rotary_mode("alibi"), ConfigError);
  for (auto m : {RotaryMode::ordinal, RotaryMode::timestamp_feature, RotaryMode::to_rope, RotaryMode::siren})
    CHECK(parse_rotary_mode(to_string(m)) == m);
}

TEST_CASE("rotation preserves norms and composes additively") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> ang(-20.0, 20.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Tensor x = random_tensor(rng, {16});
    std::vector<double> a(8), b(8), ab(8);
    for (std::size_t j = 0; j < 8; ++j) {
      a[j] = ang(rng);
      b[j] = ang(rng);
      ab[j] = a[j] + b[j];
    }
    const Tensor ra = rotate(x, angles_of(a));
    CHECK(std::sqrt(dot(ra, ra)) == doctest::Approx(std::sqrt(dot(x, x))).epsilon(1e-12));
    const Tensor twice = rotate(ra, angles_of(b));
    const Tensor once = rotate(x, angles_of(ab));
    for (std::size_t i = 0; i < 16; ++i) CHECK(twice[i] == doctest::Approx(once[i]).epsilon(1e-9));
  }
}

TEST_CASE("ordinal scores depend only on the offset") {
  std::mt19937_64 rng(22);
  const auto cfg = RotaryConfig::make(RotaryMode::ordinal, 1e4, 16);
  const TimeNormalization norm;
  const Tensor q = random_tensor(rng, {16});
  const Tensor k = random_tensor(rng, {16});
  double worst = 0.0;
  for (int m = 0; m < 64; ++m) {
    for (int n = 0; n < 64; ++n) {
      const double s = dot(rotate(q, angle(cfg, m, 0.0, nullptr, norm)),
                           rotate(k, angle(cfg, n, 0.0, nullptr, norm)));
      const double ref = dot(q, rotate(k, angle(cfg, n - m >= 0 ? n - m : 0, 0.0, nullptr, norm)));
      if (n >= m) worst = std::max(worst, std::abs(s - ref));
    }
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("mode angle contracts") {
  const TimeNormalization norm{1'700'000'000.0, kSecondsPerYear};
  const std::vector<double> pos{0, 1, 5};
  const std::vector<double> t1{1'700'000'000.0, 1'700'003'600.0, 1'700'090'000.0};
  const std::vector<double> t2{1'600'000'000.0, 1'650'003'600.0, 1'710'090'000.0};
  const auto freq = inverse_frequencies(1e6, 8);

  const auto ord = RotaryConfig::make(RotaryMode::ordinal, 1e6, 8);
  const Tensor a1 = fused_angles(ord, pos, t1, norm, nullptr);
  const Tensor a2 = fused_angles(ord, pos, t2, norm, nullptr);
  for (std::size_t i = 0; i < a1.numel(); ++i) CHECK(a1[i] == a2[i]);
  CHECK(a1.at(2, 1) == 5.0 * freq[1]);

  const auto tsf = RotaryConfig::make(RotaryMode::timestamp_feature, 1e6, 8);
  const Tensor a3 = fused_angles(tsf, pos, t2, norm, nullptr);
  for (std::size_t i = 0; i < a1.numel(); ++i) CHECK(a1[i] == a3[i]);

  const auto to = RotaryConfig::make(RotaryMode::to_rope, 1e6, 8);
  const std::vector<double> shuffled_pos{9, 3, 0};
  const Tensor b1 = fused_angles(to, pos, t1, norm, nullptr);
  const Tensor b2 = fused_angles(to, shuffled_pos, t1, norm, nullptr);
  for (std::size_t i = 0; i < b1.numel(); ++i) CHECK(b1[i] == b2[i]);
  CHECK(b1.at(1, 2) == doctest::Approx(norm.normalize(t1[1]) * freq[2]));
}

TEST_CASE("siren angle") {
  const TimeNormalization norm{1'700'000'000.0, kSecondsPerYear};
  auto cfg = RotaryConfig::make(RotaryMode::siren, 1e6, 8);
  CHECK(cfg.lambda.item() == 1.0);
  for (double w : cfg.omega_s.data()) CHECK(w == std::numbers::pi);
  const std::vector<double> pos{0, 1, 2, 7};
  const std::vector<double> ts{1'700'000'000.0, 1'700'000'100.0, 1'700'050'000.0, 1'700'900'000.0};

  SUBCASE("zero angle network and unit gate reduce to ordinal exactly") {
    const Tensor zeros = Tensor::zeros({4, 4});
    const Tensor s = fused_angles(cfg, pos, ts, norm, &zeros);
    const Tensor o = fused_angles(RotaryConfig::make(RotaryMode::ordinal, 1e6, 8), pos, ts, norm, nullptr);
    for (std::size_t i = 0; i < s.numel(); ++i) CHECK(s[i] == o[i]);
  }
  SUBCASE("position zero gives v * omega") {
    cfg.lambda.mutable_data()[0] = 0.37;
    for (std::size_t j = 0; j < 4; ++j) cfg.omega_s.mutable_data()[j] = 0.5 + static_cast<double>(j);
    const Tensor v = Tensor::from_data({1, 4}, {0.1, -0.2, 0.3, 2.0});
    const std::vector<double> p0{0.0}, t0{ts[0]};
    const Tensor a = fused_angles(cfg, p0, t0, norm, &v);
    for (std::size_t j = 0; j < 4; ++j) CHECK(a[j] == v[j] * (0.5 + static_cast<double>(j)));
  }
  SUBCASE("missing network is an error") {
    CHECK_THROWS_AS(angle(cfg, 1.0, ts[0], nullptr, norm), ConfigError);
    const Tensor wrong = Tensor::zeros({4, 3});
    CHECK_THROWS_AS(fused_angles(cfg, pos, ts, norm, &wrong), ShapeError);
  }
}

TEST_CASE("rotate gradients and gate gradients") {
  std::mt19937_64 rng(23);
  Tensor x = random_tensor(rng, {3, 8}, 1.0, true);
  Tensor theta = random_tensor(rng, {3, 4}, 2.0, true);
  const Tensor w = random_tensor(rng, {3, 8});
  const auto r = grad_check([&] { return sum(mul(rotate(x, theta), w)); }, {x, theta});
  CHECK(r.max_rel_error < 1e-7);

  const TimeNormalization norm;
  auto cfg = RotaryConfig::make(RotaryMode::siren, 1e4, 8);
  cfg.lambda.mutable_data()[0] = 0.8;
  const Tensor phi = random_tensor(rng, {3, 4});
  const std::vector<double> pos{0, 3, 9}, ts{0, 0, 0};
  const Tensor k = random_tensor(rng, {3, 8});
  const Tensor q_rot = rotate(random_tensor(rng, {3, 8}), random_tensor(rng, {3, 4}));
  auto score = [&] { return sum(mul(rotate(k, fused_angles(cfg, pos, ts, norm, &phi)), q_rot)); };
  {
    Tape tape;
    TapeScope scope(tape);
    tape.backward(score());
  }
  CHECK(std::abs(cfg.lambda.grad()[0]) > 1e-6);
  for (double g : cfg.omega_s.grad()) CHECK(std::abs(g) > 1e-8);
  const auto rg = grad_check(score, {cfg.lambda, cfg.omega_s});
  CHECK(rg.max_rel_error < 1e-6);
}
