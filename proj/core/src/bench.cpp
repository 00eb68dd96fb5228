#include "kdseq/bench.hpp"

#include <chrono>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "kdseq/seq2seq_scorer.hpp"

namespace kdseq {

BenchResult throughput_benchmark(const Seq2SeqModel& model, const std::vector<Sentence>& sources, std::size_t beam,
                                 std::size_t repetitions, DecodeConfig decode) {
  if (sources.empty()) throw std::invalid_argument("bench: empty corpus");
  if (repetitions < 1) throw std::invalid_argument("bench: repetitions must be >= 1");
  decode.beam = beam;
  decode.validate();
  const Seq2SeqScorer scorer(model);

  BenchResult r;
  r.beam = beam;
  r.repetitions = repetitions;
  for (const auto& s : sources) r.source_words += s.size();

  std::size_t sink = 0;
  auto pass = [&] {
    for (const auto& s : sources) {
      if (beam == 1)
        sink += greedy_decode(scorer, s, decode).tokens.size();
      else
        sink += beam_search(scorer, s, decode).best_output().tokens.size();
    }
  };
  pass();
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < repetitions; ++i) pass();
  const auto t1 = std::chrono::steady_clock::now();
  if (sink == 0) throw std::logic_error("bench: decoder produced nothing");

  const double total = std::chrono::duration<double>(t1 - t0).count();
  r.wall_seconds = total / static_cast<double>(repetitions);
  if (!(r.wall_seconds > 0.0)) throw std::runtime_error("bench: timer resolution too coarse");
  r.words_per_second = static_cast<double>(r.source_words) / r.wall_seconds;
  r.seconds_per_sentence = r.wall_seconds / static_cast<double>(sources.size());
  return r;
}

std::string BenchResult::to_tsv() const {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "beam\t%zu\nsource_words\t%zu\nrepetitions\t%zu\nwall_seconds\t%.6f\nwords_per_second\t%.1f\n",
                beam, source_words, repetitions, wall_seconds, words_per_second);
  return buf;
}

std::string render_bench_table(const std::vector<BenchResult>& results) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-6s %12s %12s %14s   (host CPU, batch 1)\n", "Beam", "Words", "Seconds",
                "Words/sec");
  os << line;
  for (const auto& r : results) {
    std::snprintf(line, sizeof line, "%-6zu %12zu %12.4f %14.1f\n", r.beam, r.source_words, r.wall_seconds,
                  r.words_per_second);
    os << line;
  }
  return os.str();
}

}  // namespace kdseq
