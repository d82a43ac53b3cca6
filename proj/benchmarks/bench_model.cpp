#include <benchmark/benchmark.h>

#include "sirenrope/backbone.hpp"
#include "sirenrope/synthetic.hpp"

using namespace sirenrope;

namespace {

struct Setup {
  Corpus corpus;
  TimeNormalization norm;
};

const Setup& setup() {
  static const Setup s = [] {
    GeneratorSpec g;
    g.num_users = 4;
    Setup out;
    out.corpus = generate(g);
    out.norm.t_ref = out.corpus.earliest_time();
    return out;
  }();
  return s;
}

Model model_for(benchmark::State& state) {
  BackboneConfig c;
  c.mode = static_cast<RotaryMode>(state.range(0));
  return Model::init(c, 1);
}

}  // namespace

// One C = 64 sequence at the default size (2 layers, d = 32).
static void BM_Forward(benchmark::State& state) {
  const auto model = model_for(state);
  const auto& s = setup();
  for (auto _ : state)
    benchmark::DoNotOptimize(model.forward_logits(s.corpus.sequences[0], s.norm).data().data());
  state.SetLabel(std::string(to_string(model.config().mode)));
}

static void BM_ForwardBackward(benchmark::State& state) {
  const auto model = model_for(state);
  const auto& s = setup();
  const auto& seq = s.corpus.sequences[0];
  for (auto _ : state) {
    Tape tape;
    TapeScope scope(tape);
    tape.backward(bce_with_logits(model.forward_logits(seq, s.norm), seq.label_matrix()));
  }
  state.SetLabel(std::string(to_string(model.config().mode)));
}

static void modes(benchmark::internal::Benchmark* b) {
  for (auto m : {RotaryMode::ordinal, RotaryMode::timestamp_feature, RotaryMode::to_rope,
                 RotaryMode::siren})
    b->Arg(static_cast<int>(m));
}
BENCHMARK(BM_Forward)->Apply(modes)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ForwardBackward)->Apply(modes)->Unit(benchmark::kMicrosecond);
