#include "kdseq/seq2seq_scorer.hpp"

#include <memory>

namespace kdseq {

Seq2SeqScorer::State Seq2SeqScorer::start(std::span<const TokenId> src) const {
  NoGradScope frozen;
  const std::size_t len[] = {src.size()};
  auto source = std::make_shared<const EncodedSource>(encode(*model_, src, 1, len, {}));
  return initial_decoder_state(*model_, std::move(source));
}

std::pair<std::vector<double>, Seq2SeqScorer::State> Seq2SeqScorer::step(const State& state, TokenId prev) const {
  NoGradScope frozen;
  const TokenId tok[] = {prev};
  StepOutput out = decode_step(*model_, state, tok, {});
  auto v = out.log_dist.values();
  return {std::vector<double>(v.begin(), v.end()), std::move(out.state)};
}

}  // namespace kdseq
