// Decode and training-step throughput on randomly initialised models sized
// like the toy student and teacher.

#include <benchmark/benchmark.h>

#include "kdseq/batch.hpp"
#include "kdseq/losses.hpp"
#include "kdseq/seq2seq_scorer.hpp"
#include "kdseq/toy_task.hpp"

using namespace kdseq;

namespace {

const ToyCorpus& toy() {
  static const ToyCorpus splits = generate_toy_corpus(ToyTaskConfig{}, 1);
  return splits;
}

ModelConfig sized(std::size_t layers, std::size_t hidden) {
  const auto& t = toy();
  return {layers, hidden, hidden, t.src_vocab.size(), t.tgt_vocab.size(), 0.0};
}

void BM_Decode(benchmark::State& state) {
  const auto model = init_params(sized(2, static_cast<std::size_t>(state.range(0))), 1, 0.1);
  const Seq2SeqScorer scorer(model);
  const auto sources = sources_of(toy().test);
  DecodeConfig dc;
  dc.beam = static_cast<std::size_t>(state.range(1));
  std::size_t words = 0;
  for (auto _ : state) {
    for (std::size_t i = 0; i < 50; ++i) {
      benchmark::DoNotOptimize(translate_all(scorer, {sources[i]}, dc));
      words += sources[i].size();
    }
  }
  state.counters["words/s"] = benchmark::Counter(static_cast<double>(words), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_Decode)->ArgsProduct({{16, 64}, {1, 5}})->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  auto model = init_params(sized(2, static_cast<std::size_t>(state.range(0))), 1, 0.1);
  std::vector<std::size_t> idx(64);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const Batch b = make_batch(toy().train, idx);
  for (auto _ : state) {
    model.params.zero_grad();
    Tape tape;
    TapeScope scope(tape);
    tape.backward(word_nll_loss(model, b).total);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(idx.size()));
}
BENCHMARK(BM_TrainStep)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
