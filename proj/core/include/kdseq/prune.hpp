#pragma once

// Class-blind magnitude pruning, masked retraining and compression
// accounting.

#include <map>
#include <string>
#include <vector>

#include "kdseq/distill.hpp"

namespace kdseq {

struct PruneMask {
  /// Per tensor, row-major; 1 = retained, 0 = pruned.
  std::map<std::string, std::vector<std::uint8_t>> retained;
  double pruned_fraction = 0.0;
  /// Largest pruned magnitude (0 when nothing was pruned).
  double threshold = 0.0;

  std::size_t total() const;
  std::size_t retained_count() const;
  std::size_t pruned_count() const { return total() - retained_count(); }
};

/// Number of entries removed when pruning `fraction` of `total`:
/// ceil(fraction * total), robust to the rounding of fraction * total.
std::size_t pruned_entries(std::size_t total, double fraction);

/// Masks the ceil(fraction * N) entries of smallest magnitude over all
/// tensors together. Equal magnitudes are taken in (tensor name, flat
/// index) order.
PruneMask compute_prune_mask(const ModelParams& params, double fraction);

/// Sets pruned entries to exactly 0.
void apply_mask(ModelParams& params, const PruneMask& mask);

/// Number of entries that are exactly zero where the mask prunes; equals
/// mask.pruned_count() when the mask is in force.
std::size_t zeros_under_mask(const ModelParams& params, const PruneMask& mask);

struct RetrainConfig {
  double lr_seq_kd = 0.2;
  double lr_seq_inter = 0.1;
  int max_epochs = 13;
  int stall_epochs = 2;
};

struct RetrainResult {
  Seq2SeqModel model;
  TrainResult seq_kd_phase;
  TrainResult seq_inter_phase;
};

/// Two fixed-rate phases, Seq-KD data then Seq-Inter data, with the mask
/// re-applied after every update. Each phase keeps its best-dev
/// checkpoint, and the second starts from the first.
RetrainResult retrain_pruned(const Seq2SeqModel& model, const PruneMask& mask, const ParallelCorpus& seq_kd_train,
                             const ParallelCorpus& seq_kd_dev, const ParallelCorpus& seq_inter_train,
                             const ParallelCorpus& seq_inter_dev, const LossFn& loss_fn, const RetrainConfig& rc,
                             const TrainConfig& base);

struct CompressionReport {
  std::size_t params = 0;
  std::size_t retained = 0;
  std::size_t teacher_params = 0;
  double ratio = 0.0;      // teacher_params / retained
  long long ratio_rounded = 0;

  /// e.g. "84m", "17m", "3x".
  static std::string format_count(std::size_t n);
  std::string format_ratio() const;
  std::string render() const;
  std::string to_tsv() const;
};

CompressionReport compression_report(std::size_t params, std::size_t retained, std::size_t teacher_params);

}  // namespace kdseq
