#pragma once

// BLEU-4. The sentence-level variant is add-one smoothed for n >= 2 and is
// used as a similarity in [0, 1]; the corpus-level variant pools clipped
// n-gram counts over all pairs, is unsmoothed and reports on [0, 100].

#include <array>
#include <span>
#include <string>
#include <vector>

#include "kdseq/corpus.hpp"

namespace kdseq {

struct BleuBreakdown {
  std::array<double, 4> precisions{};  // after smoothing
  double brevity_penalty = 0.0;
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;
  double score = 0.0;  // [0, 1]
};

/// p1 = m1 / l1; pn = (mn + 1) / (ln + 1) for n >= 2, which is 1 when the
/// hypothesis is shorter than n. BP = min(1, exp(1 - |ref| / |hyp|)).
BleuBreakdown smoothed_sentence_bleu(std::span<const TokenId> hyp, std::span<const TokenId> ref);

struct CorpusBleu {
  std::array<std::size_t, 4> matches{};
  std::array<std::size_t, 4> totals{};
  std::array<double, 4> precisions{};
  double brevity_penalty = 0.0;
  double ratio = 0.0;
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;
  double score = 0.0;  // [0, 100]

  /// `BLEU = s, p1/p2/p3/p4 (BP=b, ratio=r, hyp_len=h, ref_len=l)`
  std::string format() const;
};

CorpusBleu corpus_bleu(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs);

}  // namespace kdseq
