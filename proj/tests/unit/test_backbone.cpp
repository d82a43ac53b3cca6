#include <doctest.h>

#include <cmath>
#include <random>

#include "sirenrope/backbone.hpp"
#include "sirenrope/errors.hpp"
#include "test_util.hpp"

using namespace sirenrope;
using sirenrope::testing::grad_check;
using sirenrope::testing::random_tensor;

namespace {

EventSequence random_sequence(std::mt19937_64& rng, std::size_t c, std::size_t d, std::size_t tasks,
                              double t0 = 1'704'067'200.0) {
  EventSequence s;
  s.user_id = 1;
  s.items = random_tensor(rng, {c, d});
  s.actions = random_tensor(rng, {c, d});
  std::uniform_real_distribution<double> gap(600.0, 3.0 * 86400.0);
  double t = t0;
  for (std::size_t i = 0; i < c; ++i) {
    s.timestamps.push_back(std::round(t));
    t += gap(rng);
  }
  s.num_tasks = tasks;
  std::bernoulli_distribution coin(0.4);
  for (std::size_t i = 0; i < c * tasks; ++i) s.labels.push_back(coin(rng) ? 1.0 : 0.0);
  return s;
}

BackboneConfig small_config(RotaryMode mode) {
  BackboneConfig c;
  c.layers = 2;
  c.model_dim = 8;
  c.heads = 2;
  c.num_tasks = 2;
  c.mode = mode;
  c.phi_hidden = 6;
  return c;
}

void randomize_phi_outputs(Model& m, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 0.5);
  for (auto* l : {&m.phi().siren_output(), &m.phi().dnn_output()})
    for (auto& w : l->weight.mutable_data()) w = d(rng);
}

double ln_ref(const std::vector<double>& x, std::size_t i, const Tensor& g, const Tensor& b) {
  double m = 0.0, v = 0.0;
  for (double a : x) m += a;
  m /= static_cast<double>(x.size());
  for (double a : x) v += (a - m) * (a - m);
  v /= static_cast<double>(x.size());
  return (x[i] - m) / std::sqrt(v + 1e-5) * g[i] + b[i];
}

}  // namespace

TEST_CASE("strict causal mask") {
  const Tensor m = strict_causal_mask(4);
  for (std::size_t n = 0; n < 4; ++n)
    for (std::size_t k = 0; k < 4; ++k) CHECK(m.at(n, k) == (k < n ? 1.0 : 0.0));
}

TEST_CASE("attention layer matches a hand-written loop for C = 3") {
  std::mt19937_64 rng(31);
  const std::size_t c = 3, d = 4;
  BackboneConfig cfg = small_config(RotaryMode::ordinal);
  cfg.model_dim = d;
  cfg.heads = 1;
  cfg.layers = 1;
  Model model = Model::init(cfg, 5);
  BlockParams& p = model.blocks()[0];
  for (auto* t : {&p.ln1_gamma, &p.ln1_beta, &p.ln2_gamma, &p.ln2_beta, &p.ffn_up.bias, &p.ffn_down.bias}) {
    std::normal_distribution<double> nd(0.5, 0.3);
    for (auto& v : t->mutable_data()) v = nd(rng);
  }
  const Tensor h = random_tensor(rng, {c, d});
  const Tensor a = random_tensor(rng, {c, d});
  const Tensor alpha = Tensor::from_data({1}, {0.7});
  const Tensor angles = random_tensor(rng, {c, d / 2});
  const Tensor out = attention_layer(h, a, p, alpha, angles, 1);

  auto row = [&](const Tensor& t, std::size_t r) {
    return std::vector<double>(t.data().begin() + static_cast<std::ptrdiff_t>(r * t.cols()),
                               t.data().begin() + static_cast<std::ptrdiff_t>((r + 1) * t.cols()));
  };
  auto vecmat = [](const std::vector<double>& x, const Tensor& w) {
    std::vector<double> y(w.cols(), 0.0);
    for (std::size_t o = 0; o < w.cols(); ++o)
      for (std::size_t i = 0; i < x.size(); ++i) y[o] += x[i] * w.at(i, o);
    return y;
  };
  auto rot = [&](std::vector<double> x, std::size_t r) {
    for (std::size_t j = 0; j < d / 2; ++j) {
      const double th = angles.at(r, j), u = x[2 * j], v = x[2 * j + 1];
      x[2 * j] = u * std::cos(th) - v * std::sin(th);
      x[2 * j + 1] = u * std::sin(th) + v * std::cos(th);
    }
    return x;
  };
  std::vector<std::vector<double>> q(c), k(c), v(c);
  for (std::size_t r = 0; r < c; ++r) {
    const auto hr = row(h, r);
    std::vector<double> x(d), xv(d);
    for (std::size_t i = 0; i < d; ++i) x[i] = ln_ref(hr, i, p.ln1_gamma, p.ln1_beta);
    for (std::size_t i = 0; i < d; ++i) xv[i] = x[i] + 0.7 * a.at(r, i);
    q[r] = rot(vecmat(x, p.wq), r);
    k[r] = rot(vecmat(x, p.wk), r);
    v[r] = vecmat(xv, p.wv);
  }
  for (std::size_t n = 0; n < c; ++n) {
    std::vector<double> att(d, 0.0);
    if (n > 0) {
      std::vector<double> s(n);
      double mx = -1e300, z = 0.0;
      for (std::size_t m = 0; m < n; ++m) {
        s[m] = 0.0;
        for (std::size_t i = 0; i < d; ++i) s[m] += q[n][i] * k[m][i];
        s[m] /= std::sqrt(static_cast<double>(d));
        mx = std::max(mx, s[m]);
      }
      for (std::size_t m = 0; m < n; ++m) z += std::exp(s[m] - mx);
      for (std::size_t m = 0; m < n; ++m)
        for (std::size_t i = 0; i < d; ++i) att[i] += std::exp(s[m] - mx) / z * v[m][i];
    }
    const auto o = vecmat(att, p.wo);
    std::vector<double> h1(d), x2(d);
    for (std::size_t i = 0; i < d; ++i) h1[i] = h.at(n, i) + o[i];
    for (std::size_t i = 0; i < d; ++i) x2[i] = ln_ref(h1, i, p.ln2_gamma, p.ln2_beta);
    auto up = vecmat(x2, p.ffn_up.weight);
    for (std::size_t i = 0; i < up.size(); ++i) up[i] = std::max(0.0, up[i] + p.ffn_up.bias[i]);
    const auto down = vecmat(up, p.ffn_down.weight);
    for (std::size_t i = 0; i < d; ++i) {
      CHECK(out.at(n, i) == doctest::Approx(h1[i] + down[i] + p.ffn_down.bias[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("action pooling matches a hand-written loop") {
  std::mt19937_64 rng(32);
  const Tensor hf = random_tensor(rng, {4, 3}), it = random_tensor(rng, {4, 3}), ac = random_tensor(rng, {4, 3});
  const Tensor pooled = action_pool(hf, it, ac);
  for (std::size_t n = 0; n < 4; ++n) {
    std::vector<double> want(3, 0.0);
    if (n > 0) {
      std::vector<double> w(n);
      double z = 0.0;
      for (std::size_t m = 0; m < n; ++m) {
        double s = 0.0;
        for (std::size_t i = 0; i < 3; ++i) s += hf.at(n, i) * it.at(m, i);
        w[m] = std::exp(s / std::sqrt(3.0));
        z += w[m];
      }
      for (std::size_t m = 0; m < n; ++m)
        for (std::size_t i = 0; i < 3; ++i) want[i] += w[m] / z * ac.at(m, i);
    }
    for (std::size_t i = 0; i < 3; ++i) CHECK(pooled.at(n, i) == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("predictions ignore the event's own action and everything later") {
  std::mt19937_64 rng(33);
  const TimeNormalization norm{1'704'067'200.0, kSecondsPerYear};
  for (auto mode : {RotaryMode::ordinal, RotaryMode::timestamp_feature, RotaryMode::to_rope, RotaryMode::siren}) {
    Model m = Model::init(small_config(mode), 3);
    if (mode == RotaryMode::siren) randomize_phi_outputs(m, rng);
    const EventSequence base = random_sequence(rng, 10, 8, 2);
    const Tensor p0 = m.predict_proba(base, norm);
    for (std::size_t n = 0; n < 10; ++n) {
      EventSequence s = base;
      std::vector<double> acts(s.actions.data().begin(), s.actions.data().end());
      std::vector<double> items(s.items.data().begin(), s.items.data().end());
      for (std::size_t i = 0; i < 8; ++i) acts[n * 8 + i] += 5.0;
      for (std::size_t r = n + 1; r < 10; ++r) {
        for (std::size_t i = 0; i < 8; ++i) {
          acts[r * 8 + i] -= 3.0;
          items[r * 8 + i] *= -2.0;
        }
        s.timestamps[r] += 77777.0 * static_cast<double>(r);
      }
      s.actions = Tensor::from_data({10, 8}, acts);
      s.items = Tensor::from_data({10, 8}, items);
      const Tensor p1 = m.predict_proba(s, norm);
      for (std::size_t r = 0; r <= n; ++r)
        for (std::size_t k = 0; k < 2; ++k) CHECK(p1.at(r, k) == p0.at(r, k));
    }
  }
}

TEST_CASE("siren with a zero angle network reproduces ordinal outputs") {
  std::mt19937_64 rng(34);
  const TimeNormalization norm{1'704'067'200.0, kSecondsPerYear};
  Model ord = Model::init(small_config(RotaryMode::ordinal), 9);
  Model sir = Model::init(small_config(RotaryMode::siren), 9);
  for (int i = 0; i < 4; ++i) {
    const EventSequence s = random_sequence(rng, 12, 8, 2);
    const Tensor a = ord.forward_logits(s, norm), b = sir.forward_logits(s, norm);
    for (std::size_t j = 0; j < a.numel(); ++j) CHECK(std::abs(a[j] - b[j]) <= 1e-12);
  }
}

TEST_CASE("mode-specific parameters") {
  auto names = [](const Model& m) {
    std::vector<std::string> out;
    for (const auto& r : m.named_parameters()) out.push_back(r.name);
    return out;
  };
  auto has = [](const std::vector<std::string>& v, const std::string& n) {
    return std::find(v.begin(), v.end(), n) != v.end();
  };
  const auto ord = names(Model::init(small_config(RotaryMode::ordinal), 1));
  const auto sir = names(Model::init(small_config(RotaryMode::siren), 1));
  const auto tsf = names(Model::init(small_config(RotaryMode::timestamp_feature), 1));
  CHECK_FALSE(has(ord, "rotary.lambda"));
  CHECK(has(sir, "rotary.lambda"));
  CHECK(has(sir, "rotary.omega_s"));
  CHECK(has(sir, "phi.siren.0.weight"));
  CHECK(has(tsf, "time_proj.weight"));
  CHECK_FALSE(has(ord, "time_proj.weight"));
  CHECK(has(ord, "alpha"));

  BackboneConfig per = small_config(RotaryMode::siren);
  per.per_layer_gates = true;
  Model pm = Model::init(per, 1);
  CHECK(has(names(pm), "layers.1.rotary.lambda"));
  CHECK_FALSE(pm.rotary(0).lambda.same_storage(pm.rotary(1).lambda));
}

TEST_CASE("timestamps only matter for time-aware modes") {
  std::mt19937_64 rng(35);
  const TimeNormalization norm{1'704'067'200.0, kSecondsPerYear};
  const EventSequence a = random_sequence(rng, 8, 8, 2);
  EventSequence b = a;
  for (std::size_t i = 0; i < b.timestamps.size(); ++i) b.timestamps[i] += 12345.0 * static_cast<double>(i);
  for (auto mode : {RotaryMode::ordinal, RotaryMode::timestamp_feature, RotaryMode::to_rope, RotaryMode::siren}) {
    Model m = Model::init(small_config(mode), 2);
    if (mode == RotaryMode::siren) randomize_phi_outputs(m, rng);
    const Tensor pa = m.forward_logits(a, norm), pb = m.forward_logits(b, norm);
    double diff = 0.0;
    for (std::size_t i = 0; i < pa.numel(); ++i) diff = std::max(diff, std::abs(pa[i] - pb[i]));
    if (mode == RotaryMode::ordinal) CHECK(diff == 0.0);
    else CHECK(diff > 1e-9);
  }
}

TEST_CASE("identity input projection leaves the initial model unchanged") {
  std::mt19937_64 rng(36);
  const TimeNormalization norm{1'704'067'200.0, kSecondsPerYear};
  BackboneConfig cfg = small_config(RotaryMode::ordinal);
  Model plain = Model::init(cfg, 4);
  cfg.input_projection = true;
  Model proj = Model::init(cfg, 4);
  const EventSequence s = random_sequence(rng, 6, 8, 2);
  const Tensor a = plain.forward_logits(s, norm), b = proj.forward_logits(s, norm);
  for (std::size_t i = 0; i < a.numel(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("weight file round-trip rebuilds an identical model") {
  std::mt19937_64 rng(37);
  const TimeNormalization norm{1'704'067'200.0, 30.0 * kSecondsPerDay};
  Model m = Model::init(small_config(RotaryMode::siren), 6);
  randomize_phi_outputs(m, rng);
  m.rotary().lambda.mutable_data()[0] = 0.3;
  const WeightFile f = m.to_weight_file(norm);
  TimeNormalization loaded;
  const Model back = Model::from_weight_file(decode_weights(encode_weights(f)), &loaded);
  CHECK(loaded.t_ref == norm.t_ref);
  CHECK(loaded.t_span == norm.t_span);
  CHECK(back.config().to_metadata() == m.config().to_metadata());
  const EventSequence s = random_sequence(rng, 9, 8, 2);
  const Tensor a = m.forward_logits(s, norm), b = back.forward_logits(s, norm);
  for (std::size_t i = 0; i < a.numel(); ++i) CHECK(a[i] == b[i]);

  WeightFile missing = f;
  missing.records.pop_back();
  CHECK_THROWS_AS(Model::from_weight_file(missing), FormatError);
  WeightFile reshaped = f;
  reshaped.records[0].tensor = Tensor::zeros({2});
  CHECK_THROWS_AS(Model::from_weight_file(reshaped), FormatError);
  WeightFile bad_meta = f;
  bad_meta.metadata["model.dim"] = "eight";
  CHECK_THROWS_AS(Model::from_weight_file(bad_meta), FormatError);
}

TEST_CASE("config validation and presets") {
  const auto prod = BackboneConfig::production();
  CHECK(prod.layers == 12);
  CHECK(prod.model_dim == 512);
  CHECK(prod.heads == 4);
  CHECK(prod.head_dim() == 128);
  CHECK(BackboneConfig::from_metadata(prod.to_metadata()).to_metadata() == prod.to_metadata());
  BackboneConfig bad;
  bad.model_dim = 30;
  bad.heads = 4;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.model_dim = 6;
  bad.heads = 2;  // head_dim 3 is odd
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("sequence validation") {
  std::mt19937_64 rng(38);
  EventSequence s = random_sequence(rng, 5, 4, 2);
  CHECK_NOTHROW(s.validate());
  std::swap(s.timestamps[1], s.timestamps[3]);
  CHECK_THROWS(s.validate());
  CHECK_NOTHROW(s.validate(false));
  s = random_sequence(rng, 5, 4, 2);
  s.labels[3] = 0.5;
  CHECK_THROWS(s.validate());
  s = random_sequence(rng, 5, 4, 2);
  s.labels.pop_back();
  CHECK_THROWS_AS(s.validate(), ShapeError);
}

TEST_CASE("end-to-end gradient through a one-layer backbone") {
  std::mt19937_64 rng(39);
  const TimeNormalization norm{1'704'067'200.0, 30.0 * kSecondsPerDay};
  BackboneConfig cfg = small_config(RotaryMode::siren);
  cfg.layers = 1;
  cfg.model_dim = 4;
  cfg.heads = 1;
  cfg.phi_hidden = 4;
  cfg.phi_omega0 = 2.0;
  Model m = Model::init(cfg, 7);
  randomize_phi_outputs(m, rng);
  // keep ReLU units away from the kink at zero
  for (auto& l : m.phi().relu_layers())
    for (auto& b : l.bias.mutable_data()) b = 0.3;
  const EventSequence s = random_sequence(rng, 5, 4, 2);
  std::vector<Tensor> params;
  for (const auto& r : m.named_parameters()) params.push_back(r.tensor);
  const auto r = grad_check([&] { return bce_with_logits(m.forward_logits(s, norm), s.label_matrix()); }, params);
  INFO(r.worst);
  CHECK(r.max_rel_error < 1e-3);
}
