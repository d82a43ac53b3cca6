#include <doctest.h>

#include <cmath>
#include <limits>

#include "sirenrope/errors.hpp"
#include "sirenrope/metrics.hpp"
#include "sirenrope/synthetic.hpp"
#include "sirenrope/trainer.hpp"

using namespace sirenrope;

namespace {

struct TinySetup {
  Corpus corpus;
  TimeNormalization norm;
  BackboneConfig config;
};

TinySetup tiny(RotaryMode mode, std::size_t users = 12, std::size_t seq_len = 12) {
  GeneratorSpec g;
  g.num_users = users;
  g.seq_len = seq_len;
  g.embed_dim = 8;
  g.eval_fraction = 0.25;
  TinySetup s;
  s.corpus = generate(g);
  s.norm.t_ref = s.corpus.earliest_time();
  s.config.model_dim = 8;
  s.config.heads = 2;
  s.config.phi_hidden = 8;
  s.config.mode = mode;
  return s;
}

bool same_parameters(const Model& a, const Model& b) {
  const auto pa = a.named_parameters();
  const auto pb = b.named_parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i].name != pb[i].name) return false;
    if (!std::ranges::equal(pa[i].tensor.data(), pb[i].tensor.data())) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("adam minimizes a quadratic") {
  Tensor x = Tensor::parameter({3}, {4.0, -2.0, 1.0});
  const Tensor target = Tensor::from_data({3}, {1.0, 2.0, -3.0});
  Adam adam({x}, 0.9, 0.999, 1e-8);
  for (int i = 0; i < 2000; ++i) {
    Tape tape;
    TapeScope scope(tape);
    tape.backward(sum(square(sub(x, target))));
    adam.step(0.05);
  }
  for (std::size_t i = 0; i < 3; ++i) CHECK(x[i] == doctest::Approx(target[i]).epsilon(1e-4));
  CHECK((x.grad().empty() || x.grad()[0] == 0.0));
}

TEST_CASE("first adam step moves each coordinate by lr against the gradient sign") {
  Tensor x = Tensor::parameter({2}, {0.0, 0.0});
  Adam adam({x}, 0.9, 0.999, 1e-12);
  Tape tape;
  {
    TapeScope scope(tape);
    tape.backward(sum(mul(x, Tensor::from_data({2}, {3.0, -0.5}))));
  }
  adam.step(0.1);
  CHECK(x[0] == doctest::Approx(-0.1));
  CHECK(x[1] == doctest::Approx(0.1));
}

TEST_CASE("cosine schedule endpoints") {
  TrainConfig c;
  c.lr = 1e-2;
  c.lr_min = 1e-3;
  CHECK(cosine_lr(c, 0, 100) == doctest::Approx(1e-2));
  CHECK(cosine_lr(c, 50, 100) == doctest::Approx(5.5e-3));
  CHECK(cosine_lr(c, 100, 100) == doctest::Approx(1e-3));
  for (std::size_t s = 1; s <= 100; ++s) CHECK(cosine_lr(c, s, 100) <= cosine_lr(c, s - 1, 100));
}

TEST_CASE("bad train configs are rejected") {
  TrainConfig c;
  c.lr = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.lr_min = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  const auto s = tiny(RotaryMode::ordinal);
  CHECK_THROWS_AS(train(Model::init(s.config, 1), {}, {}, s.norm, TrainConfig{}),
                  std::invalid_argument);
}

TEST_CASE("zero epochs leave the model at initialization") {
  const auto s = tiny(RotaryMode::siren);
  TrainConfig c;
  c.epochs = 0;
  const auto init = Model::init(s.config, 3);
  auto result = train(init.clone(), s.corpus.subset(Split::train), s.corpus.subset(Split::eval),
                      s.norm, c);
  CHECK(same_parameters(result.model, init));
  REQUIRE(result.report.epochs.size() == 1);
  const auto& r = result.report.final_record();
  CHECK(r.epoch == 0);
  const auto direct = evaluate(init, s.corpus.subset(Split::eval), s.norm);
  REQUIRE(r.eval.size() == direct.size());
  for (std::size_t k = 0; k < direct.size(); ++k) {
    CHECK(r.eval[k].ne == direct[k].ne);
    CHECK(r.eval[k].auc == direct[k].auc);
  }
  CHECK(r.lambda == 1.0);
}

TEST_CASE("training is deterministic under seed") {
  const auto s = tiny(RotaryMode::siren);
  TrainConfig c;
  c.epochs = 2;
  c.batch_size = 4;
  c.lr = 5e-3;
  auto run = [&] {
    return train(Model::init(s.config, 5), s.corpus.subset(Split::train),
                 s.corpus.subset(Split::eval), s.norm, c);
  };
  const auto a = run();
  const auto b = run();
  CHECK(same_parameters(a.model, b.model));
  REQUIRE(a.report.epochs.size() == 3);
  for (std::size_t e = 0; e < 3; ++e)
    CHECK(to_json_line(a.report.epochs[e]) == to_json_line(b.report.epochs[e]));
  CHECK(a.report.lambda_trajectory().size() == 3);
  CHECK(a.report.lambda_trajectory()[2] != 1.0);
}

TEST_CASE("ordinal runs carry no lambda") {
  const auto s = tiny(RotaryMode::ordinal);
  TrainConfig c;
  c.epochs = 1;
  const auto r = train(Model::init(s.config, 1), s.corpus.subset(Split::train),
                       s.corpus.subset(Split::eval), s.norm, c);
  CHECK(r.report.lambda_trajectory().empty());
  const auto line = to_json_line(r.report.final_record());
  CHECK(line.find("lambda") == std::string::npos);
  CHECK(line.find("omega_s") == std::string::npos);
  CHECK(line.find("\"epoch\":1") != std::string::npos);
}

TEST_CASE("non-finite loss aborts with a diagnostic") {
  auto s = tiny(RotaryMode::ordinal);
  auto train_set = s.corpus.subset(Split::train);
  train_set[0].items.mutable_data()[0] = std::numeric_limits<double>::quiet_NaN();
  TrainConfig c;
  c.epochs = 1;
  c.batch_size = 1;
  CHECK_THROWS_AS(train(Model::init(s.config, 1), train_set, {}, s.norm, c), DivergenceError);
}

TEST_CASE("a small batch can be overfit") {
  auto s = tiny(RotaryMode::ordinal, 8, 16);
  s.corpus.splits.assign(8, Split::train);
  const auto seqs = s.corpus.subset(Split::train);
  TrainConfig c;
  c.epochs = 200;
  c.batch_size = 8;
  c.lr = 2e-2;
  const auto r = train(Model::init(s.config, 2), seqs, {}, s.norm, c);
  const auto m = evaluate(r.model, seqs, s.norm);
  for (std::size_t k = 0; k < m.size(); ++k) {
    CAPTURE(k);
    CHECK(m[k].ne < 0.2);
  }
  const auto losses = r.report.loss_curve();
  CHECK(losses.back() < losses.front());
}
