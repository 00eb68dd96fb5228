#pragma once

// Shared test oracles: finite differences, a table-driven StepModel and a
// brute-force BLEU counter that shares no code with the library.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "kdseq/decoder.hpp"
#include "kdseq/model.hpp"
#include "kdseq/ops.hpp"
#include "kdseq/rng.hpp"

namespace kdseq::testing {

/// Analytic vs central-difference gradient of a scalar function of `leaf`.
struct GradCheck {
  std::vector<double> analytic;
  std::vector<double> numeric;

  double norm_rel_error() const {
    double diff = 0.0, a = 0.0, n = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
      a += analytic[i] * analytic[i];
      n += numeric[i] * numeric[i];
    }
    const double scale = std::max(std::sqrt(a), std::sqrt(n));
    return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
  }
  double max_abs_error() const {
    double m = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) m = std::max(m, std::abs(analytic[i] - numeric[i]));
    return m;
  }
};

inline std::vector<double> numeric_gradient(const std::function<double()>& f, Tensor& leaf, double h = 1e-5) {
  std::vector<double> g(leaf.size());
  auto v = leaf.mutable_values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double orig = v[i];
    v[i] = orig + h;
    const double plus = f();
    v[i] = orig - h;
    const double minus = f();
    v[i] = orig;
    g[i] = (plus - minus) / (2.0 * h);
  }
  return g;
}

/// `build` must construct the loss from `leaves` using only recorded ops.
inline std::vector<GradCheck> check_gradients(const std::function<Tensor()>& build, std::vector<Tensor*> leaves,
                                              double h = 1e-5) {
  for (auto* l : leaves) {
    l->set_requires_grad(true);
    l->drop_grad();
  }
  {
    Tape tape;
    TapeScope scope(tape);
    tape.backward(build());
  }
  auto value = [&] {
    NoGradScope frozen;
    return build().item();
  };
  std::vector<GradCheck> out;
  for (auto* l : leaves) {
    GradCheck c;
    c.analytic = l->grad();
    c.numeric = numeric_gradient(value, *l, h);
    out.push_back(std::move(c));
  }
  return out;
}

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_size(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v));
}

/// StepModel whose next-token distribution is a fixed pseudo-random
/// function of (source, prefix). Token 3 is </s>.
class TableModel {
 public:
  struct State {
    Sentence prefix;
    bool started = false;
  };

  TableModel(std::size_t vocab, std::uint64_t seed, double temperature = 1.0)
      : vocab_(vocab), seed_(seed), temperature_(temperature) {}

  State start(std::span<const TokenId> src) const {
    src_.assign(src.begin(), src.end());
    return {};
  }
  std::pair<std::vector<double>, State> step(const State& s, TokenId tok) const {
    State next = s;
    if (next.started)
      next.prefix.push_back(tok);
    else
      next.started = true;
    return {log_dist(next.prefix), next};
  }
  std::size_t vocab_size() const { return vocab_; }

  /// Log-distribution after `prefix` (no </s> inside).
  std::vector<double> log_dist(const Sentence& prefix) const {
    std::uint64_t key = seed_;
    for (TokenId t : src_) key = derive_seed(key, static_cast<std::uint64_t>(t) + 1);
    key = derive_seed(key, 0xabcdef);
    for (TokenId t : prefix) key = derive_seed(key, static_cast<std::uint64_t>(t) + 7);
    Rng rng(key);
    std::vector<double> logits(vocab_);
    for (auto& l : logits) l = rng.uniform(-2.0, 2.0) / temperature_;
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - mx);
    for (auto& l : logits) l = l - mx - std::log(z);
    return logits;
  }

 private:
  std::size_t vocab_;
  std::uint64_t seed_;
  double temperature_;
  mutable Sentence src_;
};

static_assert(StepModel<TableModel>);

/// Every outcome of decoding up to `max_len` tokens: sequences ending in
/// </s> (finished) and </s>-free sequences of exactly max_len (truncated).
struct Outcome {
  Sentence tokens;
  double logprob;
  bool finished;
};

inline std::vector<Outcome> enumerate_outcomes(const TableModel& m, std::span<const TokenId> src, std::size_t max_len) {
  m.start(src);
  std::vector<Outcome> out;
  std::function<void(Sentence, double)> walk = [&](Sentence prefix, double lp) {
    const auto dist = m.log_dist(prefix);
    for (std::size_t v = 0; v < dist.size(); ++v) {
      Sentence next = prefix;
      next.push_back(static_cast<TokenId>(v));
      const double nlp = lp + dist[v];
      if (static_cast<TokenId>(v) == Vocabulary::kEos)
        out.push_back({next, nlp, true});
      else if (next.size() == max_len)
        out.push_back({next, nlp, false});
      else
        walk(next, nlp);
    }
  };
  walk({}, 0.0);
  return out;
}

/// Plain-loop BLEU pieces: clipped n-gram matches and hypothesis n-gram
/// totals for one pair.
struct NgramCounts {
  double matches[4] = {0, 0, 0, 0};
  double totals[4] = {0, 0, 0, 0};
};

inline NgramCounts brute_force_counts(const Sentence& hyp, const Sentence& ref) {
  NgramCounts c;
  for (std::size_t n = 1; n <= 4; ++n) {
    if (hyp.size() < n) continue;
    const std::size_t hn = hyp.size() - n + 1;
    c.totals[n - 1] = static_cast<double>(hn);
    std::vector<bool> seen(hn, false);
    for (std::size_t i = 0; i < hn; ++i) {
      if (seen[i]) continue;
      std::size_t in_hyp = 0;
      for (std::size_t j = i; j < hn; ++j)
        if (std::equal(hyp.begin() + i, hyp.begin() + i + n, hyp.begin() + j)) {
          ++in_hyp;
          seen[j] = true;
        }
      std::size_t in_ref = 0;
      for (std::size_t j = 0; j + n <= ref.size(); ++j)
        if (std::equal(hyp.begin() + i, hyp.begin() + i + n, ref.begin() + j)) ++in_ref;
      c.matches[n - 1] += static_cast<double>(std::min(in_hyp, in_ref));
    }
  }
  return c;
}

inline double brute_force_sentence_bleu(const Sentence& hyp, const Sentence& ref) {
  if (hyp.empty()) return 0.0;
  const NgramCounts c = brute_force_counts(hyp, ref);
  if (c.matches[0] == 0.0) return 0.0;
  double log_sum = std::log(c.matches[0] / c.totals[0]);
  for (int n = 1; n < 4; ++n) log_sum += std::log((c.matches[n] + 1.0) / (c.totals[n] + 1.0));
  const double bp = hyp.size() >= ref.size() ? 1.0 : std::exp(1.0 - double(ref.size()) / double(hyp.size()));
  return bp * std::exp(log_sum / 4.0);
}

inline double brute_force_corpus_bleu(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs) {
  double m[4] = {0, 0, 0, 0}, t[4] = {0, 0, 0, 0}, hl = 0, rl = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const NgramCounts c = brute_force_counts(hyps[i], refs[i]);
    for (int n = 0; n < 4; ++n) {
      m[n] += c.matches[n];
      t[n] += c.totals[n];
    }
    hl += double(hyps[i].size());
    rl += double(refs[i].size());
  }
  double log_sum = 0.0;
  for (int n = 0; n < 4; ++n) {
    if (m[n] == 0.0) return 0.0;
    log_sum += std::log(m[n] / t[n]);
  }
  const double bp = hl >= rl ? 1.0 : std::exp(1.0 - rl / hl);
  return 100.0 * bp * std::exp(log_sum / 4.0);
}

inline Sentence random_sentence(Rng& rng, std::size_t min_len, std::size_t max_len, TokenId lo, TokenId hi) {
  const std::size_t len = min_len + rng.index(max_len - min_len + 1);
  Sentence s(len);
  for (auto& t : s) t = lo + static_cast<TokenId>(rng.index(static_cast<std::size_t>(hi - lo + 1)));
  return s;
}

inline ParallelCorpus random_corpus(Rng& rng, std::size_t n, std::size_t src_vocab, std::size_t tgt_vocab,
                                    std::size_t min_len = 1, std::size_t max_len = 6) {
  ParallelCorpus c;
  for (std::size_t i = 0; i < n; ++i)
    c.pairs.push_back({random_sentence(rng, min_len, max_len, 4, static_cast<TokenId>(src_vocab - 1)),
                       random_sentence(rng, min_len, max_len, 4, static_cast<TokenId>(tgt_vocab - 1))});
  return c;
}

}  // namespace kdseq::testing
