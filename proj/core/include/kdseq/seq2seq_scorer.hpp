#pragma once

#include <span>
#include <utility>
#include <vector>

#include "kdseq/decoder.hpp"
#include "kdseq/model.hpp"

namespace kdseq {

/// StepModel adapter over a frozen Seq2SeqModel, one hypothesis per call.
/// Holds a reference; the model must outlive the scorer.
class Seq2SeqScorer {
 public:
  using State = DecoderState;

  explicit Seq2SeqScorer(const Seq2SeqModel& model) : model_(&model) {}

  State start(std::span<const TokenId> src) const;
  std::pair<std::vector<double>, State> step(const State& state, TokenId prev) const;
  std::size_t vocab_size() const { return model_->config.tgt_vocab_size; }

 private:
  const Seq2SeqModel* model_;
};

static_assert(StepModel<Seq2SeqScorer>);

}  // namespace kdseq
