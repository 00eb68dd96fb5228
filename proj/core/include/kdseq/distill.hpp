#pragma once

// Teacher-generated training data and fine-tuning.

#include <cstdint>
#include <vector>

#include "kdseq/decoder.hpp"
#include "kdseq/train.hpp"

namespace kdseq {

struct GeneratedCorpus {
  /// Source side identical to the input (same order); targets stored
  /// without </s>.
  ParallelCorpus corpus;
  /// Teacher log-probability of each stored target, </s> included when the
  /// hypothesis finished.
  std::vector<double> logprobs;
  /// Sentences where no beam hypothesis finished within the length limit
  /// and the best truncation was used instead.
  std::size_t fallbacks = 0;
};

/// Replaces every target by the teacher's highest-scoring finished beam
/// hypothesis.
GeneratedCorpus generate_seq_kd_corpus(const Seq2SeqModel& teacher, const ParallelCorpus& corpus, std::size_t beam,
                                       DecodeConfig decode = {});

/// Member of `kbest` with the highest smoothed sentence BLEU against
/// `gold`; ties go to the higher teacher log-probability, then to the
/// lexicographically smaller sequence. Returned without </s>.
Sentence select_seq_inter(const KBestList& kbest, std::span<const TokenId> gold);

/// Index into kbest.hypotheses of the select_seq_inter choice.
std::size_t select_seq_inter_index(const KBestList& kbest, std::span<const TokenId> gold);

/// Applies select_seq_inter over the first ceil(fraction * N) sentences.
GeneratedCorpus generate_seq_inter_corpus(const Seq2SeqModel& teacher, const ParallelCorpus& corpus,
                                          std::size_t beam, double fraction, DecodeConfig decode = {});

/// K-best targets per source weighted by renormalized teacher probability
/// (weights of one source sum to 1).
GeneratedCorpus generate_kbest_corpus(const Seq2SeqModel& teacher, const ParallelCorpus& corpus, std::size_t beam,
                                      DecodeConfig decode = {});

/// `samples` ancestral samples per source, each weighted 1/samples.
GeneratedCorpus generate_sampled_corpus(const Seq2SeqModel& teacher, const ParallelCorpus& corpus,
                                        std::size_t samples, std::uint64_t seed, DecodeConfig decode = {});

struct FineTuneConfig {
  double learning_rate = 0.1;
  int max_epochs = 5;
  int stall_epochs = 2;
};

/// Continues SGD from `model` at a fixed learning rate until dev perplexity
/// has not improved for `stall_epochs` epochs or `max_epochs` have run.
/// Returns the best-dev checkpoint (possibly the input).
TrainResult fine_tune(const Seq2SeqModel& model, const ParallelCorpus& train_corpus, const ParallelCorpus& dev_corpus,
                      const LossFn& loss_fn, const FineTuneConfig& ft, const TrainConfig& base,
                      const TrainHooks& hooks = {});

}  // namespace kdseq
