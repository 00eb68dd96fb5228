#include "kdseq/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "kdseq/ops.hpp"
#include "kdseq/vocab.hpp"

namespace kdseq {

namespace {

// Row index j*B + b of the time-major logits.
std::size_t row_of(const Batch& batch, std::size_t b, std::size_t j) { return j * batch.size + b; }

bool valid_position(const Batch& batch, std::size_t b, std::size_t j) { return j < batch.tgt_lengths[b]; }

// Dense target matrix for a teacher-forced batch, one-hot at gold tokens
// scaled by `scale` and sentence weight; rows at padding stay zero.
std::vector<double> one_hot_targets(const Batch& batch, std::size_t vocab, double scale) {
  std::vector<double> t(batch.size * batch.tgt_len * vocab, 0.0);
  for (std::size_t b = 0; b < batch.size; ++b)
    for (std::size_t j = 0; j < batch.tgt_lengths[b]; ++j)
      t[row_of(batch, b, j) * vocab + static_cast<std::size_t>(batch.tgt_out_at(b, j))] = scale * batch.weights[b];
  return t;
}

std::vector<double> per_sentence_sums(const Batch& batch, std::size_t vocab, std::span<const double> targets,
                                      std::span<const double> log_probs) {
  std::vector<double> out(batch.size, 0.0);
  for (std::size_t b = 0; b < batch.size; ++b) {
    const double w = batch.weights[b];
    double s = 0.0;
    for (std::size_t j = 0; j < batch.tgt_lengths[b]; ++j) {
      const std::size_t r = row_of(batch, b, j) * vocab;
      for (std::size_t k = 0; k < vocab; ++k)
        if (targets[r + k] != 0.0) s -= targets[r + k] * log_probs[r + k];
    }
    out[b] = w != 0.0 ? s / w : 0.0;
  }
  return out;
}

void check_batch(const Batch& batch) {
  if (batch.weights.size() != batch.size) throw std::invalid_argument("batch weights missing");
}

}  // namespace

LossValue word_nll_loss(const Seq2SeqModel& model, const Batch& batch, const ForwardOptions& opts) {
  check_batch(batch);
  const std::size_t V = model.config.tgt_vocab_size;
  ForcedOutput fwd = forward_teacher_forced(model, batch, opts);
  Tensor log_probs = log_softmax(fwd.logits, 1);
  Tensor targets = Tensor::from(log_probs.shape(), one_hot_targets(batch, V, 1.0));
  LossValue out;
  out.total = scale(sum(mul(targets, log_probs)), -1.0);
  out.tokens = batch.target_tokens();
  out.sentences = batch.size;
  out.per_sentence = per_sentence_sums(batch, V, targets.values(), log_probs.values());
  return out;
}

LossValue word_kd_loss(const Seq2SeqModel& student, const Seq2SeqModel& teacher, const Batch& batch, double alpha,
                       double tau, const ForwardOptions& opts) {
  check_batch(batch);
  if (student.config.tgt_vocab_size != teacher.config.tgt_vocab_size ||
      student.config.src_vocab_size != teacher.config.src_vocab_size)
    throw std::invalid_argument("word_kd_loss: teacher and student vocabularies differ");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("word_kd_loss: alpha must lie in [0, 1]");
  if (!(tau >= 1.0)) throw std::invalid_argument("word_kd_loss: tau must be >= 1");
  const std::size_t V = student.config.tgt_vocab_size;

  Tensor teacher_probs;
  {
    NoGradScope frozen;
    ForcedOutput t = forward_teacher_forced(teacher, batch, {});
    teacher_probs = softmax(tau == 1.0 ? t.logits : scale(t.logits, 1.0 / tau), 1);
  }

  ForcedOutput fwd = forward_teacher_forced(student, batch, opts);
  Tensor log_probs = log_softmax(fwd.logits, 1);

  // Soft targets restricted to gold positions and scaled by sentence weight.
  std::vector<double> soft(teacher_probs.size(), 0.0);
  auto q = teacher_probs.values();
  for (std::size_t b = 0; b < batch.size; ++b)
    for (std::size_t j = 0; j < batch.tgt_len; ++j) {
      if (!valid_position(batch, b, j)) continue;
      const std::size_t r = row_of(batch, b, j) * V;
      for (std::size_t k = 0; k < V; ++k) soft[r + k] = alpha * batch.weights[b] * q[r + k];
    }

  LossValue out;
  out.tokens = batch.target_tokens();
  out.sentences = batch.size;
  if (tau == 1.0) {
    std::vector<double> mixed = one_hot_targets(batch, V, 1.0 - alpha);
    for (std::size_t i = 0; i < mixed.size(); ++i) mixed[i] += soft[i];
    Tensor targets = Tensor::from(log_probs.shape(), std::move(mixed));
    out.total = scale(sum(mul(targets, log_probs)), -1.0);
    out.per_sentence = per_sentence_sums(batch, V, targets.values(), log_probs.values());
  } else {
    Tensor hard = Tensor::from(log_probs.shape(), one_hot_targets(batch, V, 1.0 - alpha));
    Tensor tempered = log_softmax(scale(fwd.logits, 1.0 / tau), 1);
    Tensor soft_t = Tensor::from(log_probs.shape(), std::move(soft));
    out.total = scale(add(sum(mul(hard, log_probs)), sum(mul(soft_t, tempered))), -1.0);
    auto a = per_sentence_sums(batch, V, hard.values(), log_probs.values());
    auto c = per_sentence_sums(batch, V, soft_t.values(), tempered.values());
    out.per_sentence.resize(batch.size);
    for (std::size_t b = 0; b < batch.size; ++b) out.per_sentence[b] = a[b] + c[b];
  }
  return out;
}

double sequence_logprob(const Seq2SeqModel& model, std::span<const TokenId> src, std::span<const TokenId> tgt) {
  if (src.empty() || tgt.empty()) throw std::invalid_argument("sequence_logprob: empty sequence");
  NoGradScope frozen;
  const std::size_t V = model.config.tgt_vocab_size;
  const std::vector<std::size_t> src_len{src.size()};
  // Teacher-forced over exactly the given tokens: inputs <s> t1 .. t_{J-1}.
  Batch b;
  b.size = 1;
  b.src_len = src.size();
  b.tgt_len = tgt.size();
  b.src.assign(src.begin(), src.end());
  b.tgt_in.push_back(Vocabulary::kBos);
  b.tgt_in.insert(b.tgt_in.end(), tgt.begin(), tgt.end() - 1);
  b.tgt_out.assign(tgt.begin(), tgt.end());
  b.src_lengths = src_len;
  b.tgt_lengths = {tgt.size()};
  b.indices = {0};
  b.weights = {1.0};
  ForcedOutput fwd = forward_teacher_forced(model, b, {});
  Tensor log_probs = log_softmax(fwd.logits, 1);
  double lp = 0.0;
  auto v = log_probs.values();
  for (std::size_t j = 0; j < tgt.size(); ++j) {
    if (tgt[j] < 0 || static_cast<std::size_t>(tgt[j]) >= V)
      throw std::out_of_range("sequence_logprob: target id outside vocabulary");
    lp += v[j * V + static_cast<std::size_t>(tgt[j])];
  }
  return lp;
}

LikelihoodTotals corpus_nll(const Seq2SeqModel& model, const ParallelCorpus& corpus, std::size_t batch_size) {
  if (corpus.empty()) throw std::invalid_argument("corpus_nll: empty corpus");
  NoGradScope frozen;
  LikelihoodTotals t;
  for (const auto& idx : plan_batches(corpus, batch_size, false, std::nullopt)) {
    Batch batch = make_batch(corpus, idx);
    std::fill(batch.weights.begin(), batch.weights.end(), 1.0);
    LossValue l = word_nll_loss(model, batch, {});
    for (double s : l.per_sentence) t.nll += s;
    t.tokens += l.tokens;
  }
  return t;
}

double perplexity(const Seq2SeqModel& model, const ParallelCorpus& corpus, std::size_t batch_size) {
  const LikelihoodTotals t = corpus_nll(model, corpus, batch_size);
  return std::exp(t.nll / static_cast<double>(t.tokens));
}

}  // namespace kdseq
