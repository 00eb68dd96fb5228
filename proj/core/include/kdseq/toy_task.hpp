#pragma once

// Synthetic translation task. A source sentence is a uniform random token
// sequence; its target is the seeded lexicon relabeling of each token, with
// every consecutive chunk of `chunk_size` tokens reversed, and finally each
// target token swapped for a same-class synonym with probability
// `synonym_noise_rate`.

#include <cstdint>
#include <vector>

#include "kdseq/corpus.hpp"
#include "kdseq/kv_config.hpp"
#include "kdseq/vocab.hpp"

namespace kdseq {

struct ToyTaskConfig {
  std::size_t vocab_size = 120;  // content tokens per side, specials excluded
  std::size_t min_length = 5;
  std::size_t max_length = 15;
  std::uint64_t lexicon_seed = 17;
  std::size_t chunk_size = 3;
  double synonym_noise_rate = 0.1;
  std::size_t synonym_classes = 30;
  std::size_t num_sentences = 10000;  // training pairs
  std::size_t num_dev = 500;
  std::size_t num_test = 500;

  void validate() const;
  static ToyTaskConfig from_config(const KeyValueConfig& cfg);
  KeyValueConfig to_config() const;
};

struct ToyCorpus {
  ParallelCorpus train, dev, test;
  Vocabulary src_vocab, tgt_vocab;
  /// Canonical target id for each source id (specials map to themselves).
  std::vector<TokenId> lexicon;
  /// Synonym class of each target id; -1 for specials.
  std::vector<int> synonym_class;
  std::size_t noised_tokens = 0;
  std::size_t target_tokens = 0;
};

ToyCorpus generate_toy_corpus(const ToyTaskConfig& cfg, std::uint64_t seed);

/// Lexicon relabeling followed by chunk reversal, without noise.
Sentence canonical_target(const ToyCorpus& task, const Sentence& src, std::size_t chunk_size);

}  // namespace kdseq
