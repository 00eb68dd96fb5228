#include "kdseq/train.hpp"

#include <cmath>

#include "kdseq/ops.hpp"
#include "kdseq/rng.hpp"

namespace kdseq {

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) throw ConfigError("train: learning_rate must be >= 0");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("train: lr_decay must lie in (0, 1]");
  if (!(grad_clip_norm > 0.0)) throw ConfigError("train: grad_clip_norm must be positive");
  if (!(init_range >= 0.0)) throw ConfigError("train: init_range must be >= 0");
}

void TrainConfig::apply(const KeyValueConfig& cfg) {
  cfg.require_known({"epochs", "batch_size", "learning_rate", "lr_decay", "decay_trigger", "decay_start_epoch",
                     "grad_clip_norm", "init_range", "seed", "stop_after_stalls"});
  if (auto v = cfg.get_int("epochs")) epochs = static_cast<int>(*v);
  if (auto v = cfg.get_int("batch_size")) batch_size = static_cast<std::size_t>(*v);
  if (auto v = cfg.get_double("learning_rate")) learning_rate = *v;
  if (auto v = cfg.get_double("lr_decay")) lr_decay = *v;
  if (auto v = cfg.get_string("decay_trigger")) {
    if (*v == "dev-ppl-worse")
      decay_trigger = DecayTrigger::DevPplWorse;
    else if (*v == "fixed-epoch")
      decay_trigger = DecayTrigger::FixedEpoch;
    else
      throw ConfigError("train: decay_trigger must be dev-ppl-worse or fixed-epoch");
  }
  if (auto v = cfg.get_int("decay_start_epoch")) decay_start_epoch = static_cast<int>(*v);
  if (auto v = cfg.get_double("grad_clip_norm")) grad_clip_norm = *v;
  if (auto v = cfg.get_double("init_range")) init_range = *v;
  if (auto v = cfg.get_int("seed")) seed = static_cast<std::uint64_t>(*v);
  if (auto v = cfg.get_int("stop_after_stalls")) stop_after_stalls = static_cast<int>(*v);
  validate();
}

LossFn nll_objective() {
  return [](const Seq2SeqModel& m, const Batch& b, const ForwardOptions& o) { return word_nll_loss(m, b, o); };
}

LossFn word_kd_objective(const Seq2SeqModel& teacher, double alpha, double tau) {
  return [&teacher, alpha, tau](const Seq2SeqModel& m, const Batch& b, const ForwardOptions& o) {
    return word_kd_loss(m, teacher, b, alpha, tau, o);
  };
}

double gradient_norm(const ModelParams& params) {
  double sq = 0.0;
  for (const auto& [name, t] : params)
    if (t.has_grad())
      for (double g : t.node()->grad) sq += g * g;
  return std::sqrt(sq);
}

TrainResult train(Seq2SeqModel model, const ParallelCorpus& train_corpus, const ParallelCorpus& dev_corpus,
                  const LossFn& loss_fn, const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  if (train_corpus.empty()) throw TrainingError("train: empty training corpus");
  train_corpus.validate(model.config.src_vocab_size, model.config.tgt_vocab_size);
  model.params.set_requires_grad(true);
  Rng dropout_rng(derive_seed(cfg.seed, 0xd50u));

  TrainResult result;
  result.initial_dev_ppl = perplexity(model, dev_corpus);
  result.best_dev_ppl = result.initial_dev_ppl;
  result.model = model.clone();

  double lr = cfg.learning_rate;
  int stalls = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.decay_trigger == DecayTrigger::FixedEpoch && epoch >= cfg.decay_start_epoch) lr *= cfg.lr_decay;

    const auto plan = plan_batches(train_corpus, cfg.batch_size, true, derive_seed(cfg.seed, epoch));
    double loss_sum = 0.0;
    std::size_t token_count = 0;
    for (std::size_t bi = 0; bi < plan.size(); ++bi) {
      const Batch batch = make_batch(train_corpus, plan[bi]);
      {
        Tape tape;
        TapeScope scope(tape);
        const LossValue loss = loss_fn(model, batch, ForwardOptions{true, &dropout_rng});
        const double value = loss.sum();
        if (!std::isfinite(value))
          throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(bi));
        loss_sum += value;
        token_count += loss.tokens;
        tape.backward(scale(loss.total, 1.0 / static_cast<double>(batch.size)));
      }
      const double norm = gradient_norm(model.params);
      const double clip = norm > cfg.grad_clip_norm ? cfg.grad_clip_norm / norm : 1.0;
      for (auto& [name, t] : model.params) {
        if (!t.has_grad()) continue;
        auto v = t.mutable_values();
        auto g = t.mutable_grad();
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * clip * g[i];
        t.zero_grad();
      }
      if (hooks.after_update) hooks.after_update(model);
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.learning_rate = lr;
    entry.train_loss = token_count ? loss_sum / static_cast<double>(token_count) : 0.0;
    entry.dev_ppl = perplexity(model, dev_corpus);
    if (!std::isfinite(entry.dev_ppl))
      throw TrainingError("non-finite dev perplexity after epoch " + std::to_string(epoch));
    entry.improved = entry.dev_ppl < result.best_dev_ppl;
    if (entry.improved) {
      result.best_dev_ppl = entry.dev_ppl;
      result.best_epoch = epoch;
      result.model = model.clone();
      stalls = 0;
    } else {
      ++stalls;
      if (cfg.decay_trigger == DecayTrigger::DevPplWorse) lr *= cfg.lr_decay;
    }
    result.log.push_back(entry);
    if (hooks.on_epoch) hooks.on_epoch(entry);
    if (cfg.stop_after_stalls > 0 && stalls >= cfg.stop_after_stalls) break;
  }
  result.model.params.set_requires_grad(true);
  return result;
}

}  // namespace kdseq
