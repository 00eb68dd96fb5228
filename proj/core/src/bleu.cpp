#include "kdseq/bleu.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

namespace kdseq {

namespace {

using NgramCounts = std::map<std::vector<TokenId>, std::size_t>;

NgramCounts count_ngrams(std::span<const TokenId> s, std::size_t n) {
  NgramCounts counts;
  if (s.size() < n) return counts;
  for (std::size_t i = 0; i + n <= s.size(); ++i) ++counts[std::vector<TokenId>(s.begin() + i, s.begin() + i + n)];
  return counts;
}

// Clipped matches and hypothesis n-gram total for one order.
std::pair<std::size_t, std::size_t> clipped(std::span<const TokenId> hyp, std::span<const TokenId> ref,
                                            std::size_t n) {
  const NgramCounts h = count_ngrams(hyp, n);
  const NgramCounts r = count_ngrams(ref, n);
  std::size_t match = 0, total = 0;
  for (const auto& [gram, c] : h) {
    total += c;
    auto it = r.find(gram);
    if (it != r.end()) match += std::min(c, it->second);
  }
  return {match, total};
}

double brevity(std::size_t hyp_len, std::size_t ref_len) {
  if (hyp_len == 0) return 0.0;
  if (hyp_len >= ref_len) return 1.0;
  return std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
}

}  // namespace

BleuBreakdown smoothed_sentence_bleu(std::span<const TokenId> hyp, std::span<const TokenId> ref) {
  if (ref.empty()) throw std::invalid_argument("smoothed_sentence_bleu: empty reference");
  BleuBreakdown b;
  b.hyp_len = hyp.size();
  b.ref_len = ref.size();
  b.brevity_penalty = brevity(hyp.size(), ref.size());
  if (hyp.empty()) return b;
  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto [m, l] = clipped(hyp, ref, n);
    const double p = n == 1 ? static_cast<double>(m) / static_cast<double>(l)
                            : static_cast<double>(m + 1) / static_cast<double>(l + 1);
    b.precisions[n - 1] = p;
    if (p == 0.0)
      zero = true;
    else
      log_sum += std::log(p);
  }
  b.score = zero ? 0.0 : b.brevity_penalty * std::exp(log_sum / 4.0);
  return b;
}

CorpusBleu corpus_bleu(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs) {
  if (hyps.size() != refs.size())
    throw std::invalid_argument("corpus_bleu: " + std::to_string(hyps.size()) + " hypotheses for " +
                                std::to_string(refs.size()) + " references");
  CorpusBleu c;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    if (refs[i].empty()) throw std::invalid_argument("corpus_bleu: empty reference at line " + std::to_string(i + 1));
    c.hyp_len += hyps[i].size();
    c.ref_len += refs[i].size();
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto [m, l] = clipped(hyps[i], refs[i], n);
      c.matches[n - 1] += m;
      c.totals[n - 1] += l;
    }
  }
  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t n = 0; n < 4; ++n) {
    c.precisions[n] = c.totals[n] ? static_cast<double>(c.matches[n]) / static_cast<double>(c.totals[n]) : 0.0;
    if (c.precisions[n] == 0.0)
      zero = true;
    else
      log_sum += std::log(c.precisions[n]);
  }
  c.brevity_penalty = brevity(c.hyp_len, c.ref_len);
  c.ratio = c.ref_len ? static_cast<double>(c.hyp_len) / static_cast<double>(c.ref_len) : 0.0;
  c.score = zero ? 0.0 : 100.0 * c.brevity_penalty * std::exp(log_sum / 4.0);
  return c;
}

std::string CorpusBleu::format() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "BLEU = %.2f, %.1f/%.1f/%.1f/%.1f (BP=%.3f, ratio=%.3f, hyp_len=%zu, ref_len=%zu)",
                score, 100.0 * precisions[0], 100.0 * precisions[1], 100.0 * precisions[2], 100.0 * precisions[3],
                brevity_penalty, ratio, hyp_len, ref_len);
  return buf;
}

}  // namespace kdseq
