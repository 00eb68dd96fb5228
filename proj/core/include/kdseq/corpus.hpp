#pragma once

#include <compare>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "kdseq/ops.hpp"

namespace kdseq {

class Vocabulary;

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Sentence = std::vector<TokenId>;

struct SentencePair {
  Sentence src;
  Sentence tgt;
  bool operator==(const SentencePair&) const = default;
  auto operator<=>(const SentencePair&) const = default;
};

/// Aligned (source, target) id sequences. Targets carry no <s>/</s>
/// wrappers; batching adds them. `weights` is either empty (all pairs weigh
/// 1) or holds one training weight per pair.
struct ParallelCorpus {
  std::vector<SentencePair> pairs;
  std::vector<double> weights;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
  double weight(std::size_t i) const { return weights.empty() ? 1.0 : weights[i]; }
  std::size_t source_words() const;
  std::size_t target_words() const;

  /// Throws CorpusError on empty sides or ids outside the vocabularies.
  void validate(std::size_t src_vocab_size, std::size_t tgt_vocab_size) const;

  bool operator==(const ParallelCorpus&) const = default;
};

/// Whitespace-split lines; unless `allow_empty`, a line that is empty after
/// trimming is an error citing its 1-based line number.
std::vector<std::vector<std::string>> read_token_lines(const std::filesystem::path& path, bool allow_empty = false);
void write_token_lines(const std::filesystem::path& path, const std::vector<std::vector<std::string>>& lines);

std::filesystem::path source_path(const std::filesystem::path& prefix);
std::filesystem::path target_path(const std::filesystem::path& prefix);

/// Reads `<prefix>.src` and `<prefix>.tgt`, which must have equal line counts.
ParallelCorpus read_corpus(const std::filesystem::path& prefix, const Vocabulary& src_vocab,
                           const Vocabulary& tgt_vocab);
void write_corpus(const std::filesystem::path& prefix, const ParallelCorpus& corpus, const Vocabulary& src_vocab,
                  const Vocabulary& tgt_vocab);

std::vector<Sentence> read_sentences(const std::filesystem::path& path, const Vocabulary& vocab,
                                     bool allow_empty = false);
void write_sentences(const std::filesystem::path& path, const std::vector<Sentence>& sentences,
                     const Vocabulary& vocab);

}  // namespace kdseq
