#pragma once

// Greedy decoding, beam search, ancestral sampling and K-best utilities over
// any left-to-right scorer satisfying StepModel. Seq2SeqScorer adapts the
// attentional model; tests plug in table-driven scorers.
//
// Scores are raw accumulated log-probabilities; there is no length
// normalization. Hypotheses are ordered by score, then by token sequence
// (lexicographic).

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "kdseq/corpus.hpp"
#include "kdseq/rng.hpp"
#include "kdseq/vocab.hpp"

namespace kdseq {

template <class M>
concept StepModel = requires(const M& m, const typename M::State& s, TokenId tok, std::span<const TokenId> src) {
  { m.start(src) } -> std::same_as<typename M::State>;
  { m.step(s, tok) } -> std::same_as<std::pair<std::vector<double>, typename M::State>>;
  { m.vocab_size() } -> std::convertible_to<std::size_t>;
};

struct DecodeConfig {
  std::size_t beam = 5;
  std::size_t max_len = 50;
  /// Output length cap as a multiple of the source length; <= 0 disables
  /// it so that max_len alone applies.
  double length_cap_ratio = 2.0;

  std::size_t effective_max_len(std::size_t src_len) const {
    if (length_cap_ratio <= 0.0) return max_len;
    const auto cap = static_cast<std::size_t>(std::ceil(length_cap_ratio * static_cast<double>(src_len)));
    return std::max<std::size_t>(1, std::min(max_len, cap));
  }
  void validate() const {
    if (beam < 1) throw std::invalid_argument("decode: beam must be >= 1");
    if (max_len < 1) throw std::invalid_argument("decode: max_len must be >= 1");
  }
};

struct Hypothesis {
  Sentence tokens;  // ends with </s> when finished
  double logprob = 0.0;
  bool finished = false;

  /// Tokens without the trailing </s>.
  Sentence output() const {
    Sentence s = tokens;
    if (finished && !s.empty()) s.pop_back();
    return s;
  }
};

/// Strict total order: higher logprob first, then lexicographic tokens.
inline bool hypothesis_before(const Hypothesis& a, const Hypothesis& b) {
  if (a.logprob != b.logprob) return a.logprob > b.logprob;
  return a.tokens < b.tokens;
}

struct KBestList {
  std::vector<Hypothesis> hypotheses;  // sorted by hypothesis_before
  std::size_t beam_width = 0;

  bool empty() const { return hypotheses.empty(); }
  std::size_t size() const { return hypotheses.size(); }
  /// Highest-scoring finished hypothesis, or the best truncation when none
  /// finished.
  const Hypothesis& best_output() const {
    if (hypotheses.empty()) throw std::logic_error("empty K-best list");
    for (const auto& h : hypotheses)
      if (h.finished) return h;
    return hypotheses.front();
  }
};

template <StepModel M>
Hypothesis greedy_decode(const M& model, std::span<const TokenId> src, const DecodeConfig& cfg) {
  cfg.validate();
  const std::size_t limit = cfg.effective_max_len(src.size());
  Hypothesis hyp;
  auto state = model.start(src);
  TokenId prev = Vocabulary::kBos;
  for (std::size_t t = 0; t < limit; ++t) {
    auto [log_dist, next] = model.step(state, prev);
    // first index wins ties
    const auto best = static_cast<TokenId>(std::max_element(log_dist.begin(), log_dist.end()) - log_dist.begin());
    hyp.tokens.push_back(best);
    hyp.logprob += log_dist[static_cast<std::size_t>(best)];
    if (best == Vocabulary::kEos) {
      hyp.finished = true;
      break;
    }
    state = std::move(next);
    prev = best;
  }
  return hyp;
}

/// Beam search with a completed pool: each step expands every alive
/// hypothesis over the full vocabulary and keeps the top K expansions;
/// those ending in </s> move to the pool. Search stops once the pool holds
/// K hypotheses, no hypothesis is alive, or the length limit is reached.
/// If fewer than K finished, the best truncated hypotheses fill the list.
template <StepModel M>
KBestList beam_search(const M& model, std::span<const TokenId> src, const DecodeConfig& cfg) {
  cfg.validate();
  using State = typename M::State;
  const std::size_t K = cfg.beam;
  const std::size_t limit = cfg.effective_max_len(src.size());
  const std::size_t V = model.vocab_size();

  struct Alive {
    Hypothesis hyp;
    State state;
    TokenId last;
  };
  struct Candidate {
    double score;
    std::size_t parent;
    TokenId token;
  };

  std::vector<Alive> alive;
  alive.push_back({Hypothesis{}, model.start(src), Vocabulary::kBos});
  std::vector<Hypothesis> pool;

  for (std::size_t t = 0; t < limit && !alive.empty() && pool.size() < K; ++t) {
    std::vector<State> next_states;
    std::vector<Candidate> cands;
    next_states.reserve(alive.size());
    cands.reserve(alive.size() * V);
    for (std::size_t p = 0; p < alive.size(); ++p) {
      auto [log_dist, next] = model.step(alive[p].state, alive[p].last);
      for (std::size_t v = 0; v < V; ++v)
        cands.push_back({alive[p].hyp.logprob + log_dist[v], p, static_cast<TokenId>(v)});
      next_states.push_back(std::move(next));
    }
    // Same-length extensions: compare parent token sequences, then token.
    auto before = [&](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.parent != b.parent) return alive[a.parent].hyp.tokens < alive[b.parent].hyp.tokens;
      return a.token < b.token;
    };
    const std::size_t keep = std::min(K, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(), before);

    std::vector<Alive> next_alive;
    for (std::size_t i = 0; i < keep; ++i) {
      const Candidate& c = cands[i];
      Hypothesis h = alive[c.parent].hyp;
      h.tokens.push_back(c.token);
      h.logprob = c.score;
      if (c.token == Vocabulary::kEos) {
        h.finished = true;
        pool.push_back(std::move(h));
      } else {
        next_alive.push_back({std::move(h), next_states[c.parent], c.token});
      }
    }
    alive = std::move(next_alive);
  }

  std::sort(pool.begin(), pool.end(), hypothesis_before);
  if (pool.size() > K) pool.resize(K);
  if (pool.size() < K) {
    std::vector<Hypothesis> rest;
    for (auto& a : alive) rest.push_back(std::move(a.hyp));
    std::sort(rest.begin(), rest.end(), hypothesis_before);
    for (auto& h : rest) {
      if (pool.size() >= K) break;
      pool.push_back(std::move(h));
    }
  }
  std::sort(pool.begin(), pool.end(), hypothesis_before);
  return KBestList{std::move(pool), K};
}

/// Ancestral sampling from the per-step distributions.
template <StepModel M>
Hypothesis sample_sequence(const M& model, std::span<const TokenId> src, const DecodeConfig& cfg,
                           std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  const std::size_t limit = cfg.effective_max_len(src.size());
  Hypothesis hyp;
  auto state = model.start(src);
  TokenId prev = Vocabulary::kBos;
  for (std::size_t t = 0; t < limit; ++t) {
    auto [log_dist, next] = model.step(state, prev);
    const double u = rng.uniform();
    double cum = 0.0;
    std::size_t pick = log_dist.size();
    for (std::size_t v = 0; v < log_dist.size(); ++v) {
      cum += std::exp(log_dist[v]);
      if (u < cum) {
        pick = v;
        break;
      }
    }
    if (pick == log_dist.size()) {
      // rounding left the cumulative mass just below u: take the last
      // token with nonzero probability
      for (std::size_t v = log_dist.size(); v-- > 0;)
        if (std::exp(log_dist[v]) > 0.0) {
          pick = v;
          break;
        }
    }
    const auto tok = static_cast<TokenId>(pick);
    hyp.tokens.push_back(tok);
    hyp.logprob += log_dist[pick];
    if (tok == Vocabulary::kEos) {
      hyp.finished = true;
      break;
    }
    state = std::move(next);
    prev = tok;
  }
  return hyp;
}

/// Weights proportional to exp(logprob), summing to 1.
inline std::vector<double> renormalize_kbest(const KBestList& kbest) {
  if (kbest.empty()) throw std::invalid_argument("renormalize_kbest: empty list");
  double mx = -std::numeric_limits<double>::infinity();
  for (const auto& h : kbest.hypotheses) mx = std::max(mx, h.logprob);
  std::vector<double> w;
  w.reserve(kbest.size());
  double z = 0.0;
  for (const auto& h : kbest.hypotheses) {
    w.push_back(std::exp(h.logprob - mx));
    z += w.back();
  }
  for (auto& x : w) x /= z;
  return w;
}

/// Mean over sources of the probability of the greedy output.
template <StepModel M>
double mode_mass(const M& model, const std::vector<Sentence>& sources, const DecodeConfig& cfg) {
  if (sources.empty()) throw std::invalid_argument("mode_mass: empty corpus");
  double total = 0.0;
  for (const auto& s : sources) total += std::exp(greedy_decode(model, s, cfg).logprob);
  return total / static_cast<double>(sources.size());
}

/// Best output per source: greedy for beam 1, otherwise the best finished
/// beam hypothesis.
template <StepModel M>
std::vector<Hypothesis> translate_all(const M& model, const std::vector<Sentence>& sources, const DecodeConfig& cfg) {
  std::vector<Hypothesis> out;
  out.reserve(sources.size());
  for (const auto& s : sources)
    out.push_back(cfg.beam == 1 ? greedy_decode(model, s, cfg) : beam_search(model, s, cfg).best_output());
  return out;
}

inline std::vector<Sentence> sources_of(const ParallelCorpus& corpus) {
  std::vector<Sentence> out;
  out.reserve(corpus.size());
  for (const auto& p : corpus.pairs) out.push_back(p.src);
  return out;
}

inline std::vector<Sentence> targets_of(const ParallelCorpus& corpus) {
  std::vector<Sentence> out;
  out.reserve(corpus.size());
  for (const auto& p : corpus.pairs) out.push_back(p.tgt);
  return out;
}

}  // namespace kdseq
