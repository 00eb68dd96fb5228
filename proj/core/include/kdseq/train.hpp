#pragma once

// Plain SGD with global-norm gradient clipping, learning-rate decay and
// best-dev-perplexity checkpoint selection.

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "kdseq/kv_config.hpp"
#include "kdseq/losses.hpp"

namespace kdseq {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DecayTrigger { DevPplWorse, FixedEpoch };

struct TrainConfig {
  int epochs = 13;
  std::size_t batch_size = 64;
  double learning_rate = 1.0;
  double lr_decay = 0.5;
  DecayTrigger decay_trigger = DecayTrigger::DevPplWorse;
  int decay_start_epoch = 9;  // first decayed epoch under FixedEpoch
  double grad_clip_norm = 5.0;
  double init_range = 0.1;
  std::uint64_t seed = 1;
  /// Stop after this many consecutive epochs without a dev improvement;
  /// 0 disables early stopping.
  int stop_after_stalls = 0;

  void validate() const;
  /// Overrides fields present in `cfg` (unknown keys are errors).
  void apply(const KeyValueConfig& cfg);
};

using LossFn = std::function<LossValue(const Seq2SeqModel&, const Batch&, const ForwardOptions&)>;

LossFn nll_objective();
/// Word-level distillation against a frozen teacher; the teacher must
/// outlive the returned function.
LossFn word_kd_objective(const Seq2SeqModel& teacher, double alpha, double tau);

struct EpochLog {
  int epoch = 0;
  double learning_rate = 0.0;
  double train_loss = 0.0;  // per-token mean over the epoch
  double dev_ppl = 0.0;
  bool improved = false;
};

struct TrainHooks {
  /// Runs after every parameter update (used to hold pruned weights at 0).
  std::function<void(Seq2SeqModel&)> after_update;
  std::function<void(const EpochLog&)> on_epoch;
};

struct TrainResult {
  Seq2SeqModel model;  // best-dev checkpoint
  std::vector<EpochLog> log;
  double initial_dev_ppl = 0.0;
  double best_dev_ppl = 0.0;
  int best_epoch = 0;  // 0 means the starting parameters were never beaten
};

/// Gradients are of the per-sentence summed loss averaged over the batch.
TrainResult train(Seq2SeqModel model, const ParallelCorpus& train_corpus, const ParallelCorpus& dev_corpus,
                  const LossFn& loss_fn, const TrainConfig& cfg, const TrainHooks& hooks = {});

/// Global L2 norm over all gradient buffers.
double gradient_norm(const ModelParams& params);

}  // namespace kdseq
