#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kdseq/ops.hpp"

namespace kdseq {

/// Bidirectional token <-> id table. Ids 0..3 are always the specials
/// <pad>, <unk>, <s>, </s>; unlisted tokens encode to <unk>.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kBos = 2;
  static constexpr TokenId kEos = 3;
  static constexpr std::size_t kNumSpecials = 4;
  static const std::array<std::string, kNumSpecials>& specials();

  Vocabulary();
  /// Specials followed by `tokens` in order. Tokens must be distinct,
  /// nonempty, space-free and must not repeat a special.
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  std::size_t size() const { return tokens_.size(); }
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<TokenId> encode(const std::vector<std::string>& tokens) const;
  std::vector<std::string> decode(std::span<const TokenId> ids) const;

  /// One token per line; line number is the id.
  std::string serialize() const;
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  /// FNV-1a 64 of the serialized form; stored in checkpoints.
  std::uint64_t checksum() const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Specials plus the (max_size - 4) most frequent tokens of `corpus`;
/// frequency ties are broken lexicographically.
Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus, std::size_t max_size);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace kdseq
