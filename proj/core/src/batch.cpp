#include "kdseq/batch.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "kdseq/rng.hpp"
#include "kdseq/vocab.hpp"

namespace kdseq {

std::size_t Batch::target_tokens() const { return std::accumulate(tgt_lengths.begin(), tgt_lengths.end(), std::size_t{0}); }

Batch make_batch(const ParallelCorpus& corpus, std::span<const std::size_t> indices) {
  if (indices.empty()) throw std::invalid_argument("make_batch: no indices");
  Batch b;
  b.size = indices.size();
  b.indices.assign(indices.begin(), indices.end());
  for (std::size_t i : indices) {
    const auto& p = corpus.pairs.at(i);
    b.src_len = std::max(b.src_len, p.src.size());
    b.tgt_len = std::max(b.tgt_len, p.tgt.size() + 1);
  }
  b.src.assign(b.size * b.src_len, Vocabulary::kPad);
  b.tgt_in.assign(b.size * b.tgt_len, Vocabulary::kPad);
  b.tgt_out.assign(b.size * b.tgt_len, Vocabulary::kPad);
  for (std::size_t r = 0; r < b.size; ++r) {
    const auto& p = corpus.pairs[indices[r]];
    std::copy(p.src.begin(), p.src.end(), b.src.begin() + static_cast<std::ptrdiff_t>(r * b.src_len));
    b.tgt_in[r * b.tgt_len] = Vocabulary::kBos;
    for (std::size_t j = 0; j < p.tgt.size(); ++j) {
      b.tgt_in[r * b.tgt_len + j + 1] = p.tgt[j];
      b.tgt_out[r * b.tgt_len + j] = p.tgt[j];
    }
    b.tgt_out[r * b.tgt_len + p.tgt.size()] = Vocabulary::kEos;
    b.src_lengths.push_back(p.src.size());
    b.tgt_lengths.push_back(p.tgt.size() + 1);
    b.weights.push_back(corpus.weight(indices[r]));
  }
  return b;
}

std::vector<std::vector<std::size_t>> plan_batches(const ParallelCorpus& corpus, std::size_t batch_size,
                                                   bool sort_by_length, std::optional<std::uint64_t> shuffle_seed) {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::optional<Rng> rng;
  if (shuffle_seed) {
    rng.emplace(*shuffle_seed);
    rng->shuffle(order);
  }
  if (sort_by_length) {
    const std::size_t window = batch_size * 32;
    for (std::size_t b = 0; b < order.size(); b += window) {
      auto first = order.begin() + static_cast<std::ptrdiff_t>(b);
      auto last = order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), b + window));
      std::stable_sort(first, last, [&](std::size_t x, std::size_t y) {
        return corpus.pairs[x].src.size() < corpus.pairs[y].src.size();
      });
    }
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t b = 0; b < order.size(); b += batch_size)
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), b + batch_size)));
  if (sort_by_length && rng) rng->shuffle(batches);
  return batches;
}

std::vector<Batch> batch_iterator(const ParallelCorpus& corpus, std::size_t batch_size, bool sort_by_length,
                                  std::optional<std::uint64_t> shuffle_seed) {
  std::vector<Batch> out;
  for (const auto& idx : plan_batches(corpus, batch_size, sort_by_length, shuffle_seed))
    out.push_back(make_batch(corpus, idx));
  return out;
}

}  // namespace kdseq
