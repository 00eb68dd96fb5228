#include "kdseq/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "kdseq/corpus.hpp"

namespace kdseq {

const std::array<std::string, Vocabulary::kNumSpecials>& Vocabulary::specials() {
  static const std::array<std::string, kNumSpecials> s = {"<pad>", "<unk>", "<s>", "</s>"};
  return s;
}

Vocabulary::Vocabulary() {
  for (const auto& s : specials()) {
    index_.emplace(s, static_cast<TokenId>(tokens_.size()));
    tokens_.push_back(s);
  }
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  Vocabulary v;
  for (const auto& t : tokens) {
    if (t.empty() || t.find_first_of(" \t\r\n") != std::string::npos)
      throw CorpusError("vocabulary token must be nonempty and whitespace-free: `" + t + "`");
    if (!v.index_.emplace(t, static_cast<TokenId>(v.tokens_.size())).second)
      throw CorpusError("duplicate vocabulary token `" + t + "`");
    v.tokens_.push_back(t);
  }
  return v;
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return index_.count(std::string(token)) != 0; }

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary of size " +
                            std::to_string(tokens_.size()));
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<TokenId> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::vector<std::string> Vocabulary::decode(std::span<const TokenId> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (TokenId i : ids) out.push_back(token(i));
  return out;
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (const auto& t : tokens_) out += t + "\n";
  return out;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CorpusError("cannot write vocabulary " + path.string());
  out << serialize();
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  auto lines = read_token_lines(path);
  const auto& sp = specials();
  if (lines.size() < kNumSpecials)
    throw CorpusError(path.string() + ": vocabulary must start with the four special tokens");
  for (std::size_t i = 0; i < kNumSpecials; ++i)
    if (lines[i].size() != 1 || lines[i][0] != sp[i])
      throw CorpusError(path.string() + ":" + std::to_string(i + 1) + ": expected special token " + sp[i]);
  std::vector<std::string> rest;
  for (std::size_t i = kNumSpecials; i < lines.size(); ++i) {
    if (lines[i].size() != 1)
      throw CorpusError(path.string() + ":" + std::to_string(i + 1) + ": expected one token per line");
    rest.push_back(lines[i][0]);
  }
  return from_tokens(rest);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t Vocabulary::checksum() const { return fnv1a64(serialize()); }

Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus, std::size_t max_size) {
  if (corpus.empty()) throw CorpusError("build_vocab: empty corpus");
  if (max_size < Vocabulary::kNumSpecials)
    throw CorpusError("build_vocab: max_size must leave room for the four specials");
  std::map<std::string, std::size_t> freq;
  const auto& sp = Vocabulary::specials();
  for (const auto& sentence : corpus)
    for (const auto& tok : sentence)
      if (std::find(sp.begin(), sp.end(), tok) == sp.end()) ++freq[tok];
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  // std::map iteration is already lexicographic, so a stable sort on count
  // leaves ties in lexicographic order.
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  const std::size_t keep = std::min(ranked.size(), max_size - Vocabulary::kNumSpecials);
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < keep; ++i) tokens.push_back(ranked[i].first);
  return Vocabulary::from_tokens(tokens);
}

}  // namespace kdseq
