#pragma once

// Teacher-forced training objectives and likelihood diagnostics.

#include <span>
#include <vector>

#include "kdseq/batch.hpp"
#include "kdseq/model.hpp"

namespace kdseq {

struct LossValue {
  /// Sum over non-pad target positions (</s> included) of the per-token
  /// loss, each sentence scaled by its corpus weight. Recorded on the
  /// active tape when the model's parameters require gradients.
  Tensor total;
  std::size_t tokens = 0;
  std::size_t sentences = 0;
  /// Unweighted per-sentence sums, in batch row order.
  std::vector<double> per_sentence;

  double sum() const { return total.item(); }
  double per_token_mean() const { return total.item() / static_cast<double>(tokens); }
};

/// Word-level negative log-likelihood of the observed targets.
LossValue word_nll_loss(const Seq2SeqModel& model, const Batch& batch, const ForwardOptions& opts = {});

/// (1 - alpha) * NLL + alpha * cross-entropy against the teacher's
/// next-token distribution on the same gold prefixes. For tau > 1 both the
/// teacher and the student logits of the distillation term are divided by
/// tau; the NLL term is never tempered. The teacher is run without
/// recording, so no gradient reaches it.
LossValue word_kd_loss(const Seq2SeqModel& student, const Seq2SeqModel& teacher, const Batch& batch, double alpha,
                       double tau, const ForwardOptions& opts = {});

/// log p(tgt | src): sum of per-step log-probabilities of every token in
/// `tgt`, which normally ends with </s>.
double sequence_logprob(const Seq2SeqModel& model, std::span<const TokenId> src, std::span<const TokenId> tgt);

struct LikelihoodTotals {
  double nll = 0.0;
  std::size_t tokens = 0;
};

LikelihoodTotals corpus_nll(const Seq2SeqModel& model, const ParallelCorpus& corpus, std::size_t batch_size = 64);

/// exp(total NLL / token count) over non-pad targets including </s>.
double perplexity(const Seq2SeqModel& model, const ParallelCorpus& corpus, std::size_t batch_size = 64);

}  // namespace kdseq
