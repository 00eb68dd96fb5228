#pragma once

// Decode throughput: source words translated per second, one sentence at a
// time, on the host CPU.

#include <string>
#include <vector>

#include "kdseq/decoder.hpp"
#include "kdseq/model.hpp"

namespace kdseq {

struct BenchResult {
  std::size_t beam = 1;
  std::size_t source_words = 0;  // per pass
  std::size_t repetitions = 0;
  double wall_seconds = 0.0;  // mean per pass, warmup excluded
  double words_per_second = 0.0;
  double seconds_per_sentence = 0.0;
  bool warmup_excluded = true;

  std::string to_tsv() const;
};

/// One untimed warmup pass, then `repetitions` timed passes over the
/// corpus; greedy decoding for beam 1, beam search otherwise.
BenchResult throughput_benchmark(const Seq2SeqModel& model, const std::vector<Sentence>& sources, std::size_t beam,
                                 std::size_t repetitions, DecodeConfig decode = {});

std::string render_bench_table(const std::vector<BenchResult>& results);

}  // namespace kdseq
