#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "kdseq/corpus.hpp"

namespace kdseq {

/// Padded id matrices for one minibatch, batch-major (row b, column t).
/// Decoder input is `<s> y1 .. yJ`, decoder output is `y1 .. yJ </s>`.
struct Batch {
  std::size_t size = 0;
  std::size_t src_len = 0;  // longest source
  std::size_t tgt_len = 0;  // longest target including </s>
  std::vector<TokenId> src;
  std::vector<TokenId> tgt_in;
  std::vector<TokenId> tgt_out;
  std::vector<std::size_t> src_lengths;
  std::vector<std::size_t> tgt_lengths;  // including </s>
  std::vector<std::size_t> indices;      // positions in the source corpus
  std::vector<double> weights;

  TokenId src_at(std::size_t b, std::size_t i) const { return src[b * src_len + i]; }
  TokenId tgt_in_at(std::size_t b, std::size_t j) const { return tgt_in[b * tgt_len + j]; }
  TokenId tgt_out_at(std::size_t b, std::size_t j) const { return tgt_out[b * tgt_len + j]; }
  std::size_t target_tokens() const;
};

Batch make_batch(const ParallelCorpus& corpus, std::span<const std::size_t> indices);

/// Groups corpus indices into batches. Without a shuffle seed the corpus
/// order is kept. With `sort_by_length`, pairs are sorted by source length
/// inside windows of 32 batches and the batch order
/// is then shuffled. Every index appears exactly once.
std::vector<std::vector<std::size_t>> plan_batches(const ParallelCorpus& corpus, std::size_t batch_size,
                                                   bool sort_by_length, std::optional<std::uint64_t> shuffle_seed);

std::vector<Batch> batch_iterator(const ParallelCorpus& corpus, std::size_t batch_size, bool sort_by_length,
                                  std::optional<std::uint64_t> shuffle_seed);

}  // namespace kdseq
