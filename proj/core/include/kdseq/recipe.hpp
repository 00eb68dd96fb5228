#pragma once

// Distillation recipes (combinations of Word-KD, Seq-KD and Seq-Inter),
// their reports, and the experiment grid over recipe rows.

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kdseq/distill.hpp"
#include "kdseq/toy_task.hpp"

namespace kdseq {

enum class SeqKdVariant { Mode, KBest, Sample };

struct DistillRecipe {
  bool use_word_kd = false;
  bool use_seq_kd = false;
  bool use_seq_inter = false;
  double alpha = 0.5;
  double tau = 1.0;
  std::size_t seq_kd_beam = 5;
  std::size_t seq_inter_beam = 35;
  double fine_tune_lr = 0.1;
  double seq_inter_fraction = 1.0;
  SeqKdVariant seq_kd_variant = SeqKdVariant::Mode;
  std::size_t seq_kd_samples = 5;  // Sample variant only

  bool any_regime() const { return use_word_kd || use_seq_kd || use_seq_inter; }
  /// Checks ranges; `allow_baseline` admits a recipe with no regime.
  void validate(bool allow_baseline = false) const;
  /// Overrides fields present in `cfg` (unknown keys are errors).
  void apply(const KeyValueConfig& cfg);
  static DistillRecipe from_config(const KeyValueConfig& cfg);
  KeyValueConfig to_config() const;

  /// Row label: "Baseline", "Seq-KD + Seq-Inter", ...
  std::string label() const;
  /// Inverse of the row names used in grid files: "baseline", "word-kd",
  /// "seq-kd+seq-inter", ... (components joined by '+', any order).
  static DistillRecipe from_row_name(const std::string& name, const DistillRecipe& defaults);
  static DistillRecipe from_row_name(const std::string& name) { return from_row_name(name, DistillRecipe{}); }
};

/// The eight rows of the original results table, in order.
std::vector<std::string> table_row_names();

/// Teacher plus train/dev/test corpora, with teacher-generated corpora
/// produced on first use and cached for later recipes.
class DistillationContext {
 public:
  DistillationContext(Seq2SeqModel teacher, ParallelCorpus train, ParallelCorpus dev, ParallelCorpus test,
                      DecodeConfig decode = {}, std::uint64_t seed = 1);

  const Seq2SeqModel& teacher() const { return teacher_; }
  const ParallelCorpus& train() const { return train_; }
  const ParallelCorpus& dev() const { return dev_; }
  const ParallelCorpus& test() const { return test_; }
  const DecodeConfig& decode() const { return decode_; }

  struct Split {
    const ParallelCorpus* train;
    const ParallelCorpus* dev;
  };
  Split seq_kd(const DistillRecipe& r);
  Split seq_inter(const DistillRecipe& r);
  /// Sentences whose stored target came from an unfinished hypothesis.
  std::size_t fallbacks() const { return fallbacks_; }

 private:
  struct Cached {
    ParallelCorpus train, dev;
  };
  Seq2SeqModel teacher_;
  ParallelCorpus train_, dev_, test_;
  DecodeConfig decode_;
  std::uint64_t seed_;
  std::map<std::string, Cached> cache_;
  std::size_t fallbacks_ = 0;
};

struct RecipeReport {
  std::string name;
  double bleu_greedy = 0.0;  // corpus BLEU, K = 1
  double bleu_beam = 0.0;    // corpus BLEU, K = 5
  double ppl = 0.0;          // test perplexity on gold targets
  double mode_mass = 0.0;    // mean p(greedy output)
  std::size_t params = 0;

  /// `metric<TAB>value` lines.
  std::string to_tsv() const;
};

struct RecipeResult {
  Seq2SeqModel student;
  RecipeReport report;
  TrainResult base;
  std::optional<TrainResult> fine_tuned;
};

/// Trains a fresh student (initialized from `train_cfg.seed`) under the
/// recipe and evaluates it on the test corpus. A recipe with no regime is
/// plain baseline training.
RecipeResult run_recipe(const DistillRecipe& recipe, DistillationContext& ctx, const ModelConfig& student_cfg,
                        const TrainConfig& train_cfg);

/// Test-set report for an already trained model.
RecipeReport evaluate_model(const std::string& name, const Seq2SeqModel& model, const ParallelCorpus& test,
                            const DecodeConfig& decode);

/// Table with BLEU_{K=1}, Δ_{K=1}, BLEU_{K=5}, Δ_{K=5}, PPL, p(t=ŷ), Params.
/// Deltas are taken against the row named "Baseline" if present, else the
/// first row.
std::string render_table(const std::vector<RecipeReport>& rows);
std::string grid_tsv(const std::vector<RecipeReport>& rows);

struct GridRow {
  RecipeReport report;
  double delta_greedy = 0.0;
  double delta_beam = 0.0;
};
std::vector<GridRow> with_deltas(const std::vector<RecipeReport>& rows);

/// Everything needed to run the grid from scratch. Grid files use keys
///   rows, seed, teacher_checkpoint, data_seed,
///   toy.<field>, teacher.<field>, student.<field>, train.<field>,
///   teacher_train.<field>, recipe.<field>, decode.<beam|max_len|length_cap_ratio>
struct ExperimentConfig {
  std::vector<std::string> rows = table_row_names();
  std::uint64_t seed = 1;
  std::uint64_t data_seed = 1;
  std::optional<std::filesystem::path> teacher_checkpoint;
  ToyTaskConfig toy;
  ModelConfig teacher{2, 64, 64, 0, 0, 0.3};
  ModelConfig student{2, 16, 16, 0, 0, 0.3};
  // init ranges sized for the small toy models
  TrainConfig train = with_init_range(0.8);
  TrainConfig teacher_train = with_init_range(0.4);
  DistillRecipe recipe;
  DecodeConfig decode{1, 50, 2.0};

  static ExperimentConfig from_config(const KeyValueConfig& cfg);

 private:
  static TrainConfig with_init_range(double r) {
    TrainConfig t;
    t.init_range = r;
    return t;
  }
};

struct ExperimentResult {
  std::vector<RecipeReport> rows;
  std::vector<Seq2SeqModel> students;
  Seq2SeqModel teacher;
  /// Data, teacher and every teacher-generated corpus the rows used.
  std::unique_ptr<DistillationContext> context;
};

/// Generates the toy data, trains (or loads) the teacher and runs every
/// row with the shared seed. Student checkpoints go to `out_dir` when set.
ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Splits `cfg` into the entries whose keys start with `prefix` + '.',
/// with the prefix removed.
KeyValueConfig config_section(const KeyValueConfig& cfg, const std::string& prefix);

}  // namespace kdseq
