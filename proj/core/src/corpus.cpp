#include "kdseq/corpus.hpp"

#include <fstream>
#include <sstream>

#include "kdseq/vocab.hpp"

namespace kdseq {

std::size_t ParallelCorpus::source_words() const {
  std::size_t n = 0;
  for (const auto& p : pairs) n += p.src.size();
  return n;
}

std::size_t ParallelCorpus::target_words() const {
  std::size_t n = 0;
  for (const auto& p : pairs) n += p.tgt.size();
  return n;
}

void ParallelCorpus::validate(std::size_t src_vocab_size, std::size_t tgt_vocab_size) const {
  if (!weights.empty() && weights.size() != pairs.size())
    throw CorpusError("corpus weights do not match pair count");
  auto check = [](const Sentence& s, std::size_t vocab, std::size_t i, const char* side) {
    if (s.empty()) throw CorpusError(std::string("pair ") + std::to_string(i) + ": empty " + side + " sentence");
    for (TokenId t : s)
      if (t < 0 || static_cast<std::size_t>(t) >= vocab)
        throw CorpusError(std::string("pair ") + std::to_string(i) + ": " + side + " id " + std::to_string(t) +
                          " outside vocabulary of size " + std::to_string(vocab));
  };
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    check(pairs[i].src, src_vocab_size, i, "source");
    check(pairs[i].tgt, tgt_vocab_size, i, "target");
  }
}

std::vector<std::vector<std::string>> read_token_lines(const std::filesystem::path& path, bool allow_empty) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot open " + path.string());
  std::vector<std::vector<std::string>> lines;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream is(line);
    std::vector<std::string> toks;
    std::string tok;
    while (is >> tok) toks.push_back(tok);
    if (toks.empty() && !allow_empty) throw CorpusError(path.string() + ":" + std::to_string(lineno) + ": empty line");
    lines.push_back(std::move(toks));
  }
  return lines;
}

void write_token_lines(const std::filesystem::path& path, const std::vector<std::vector<std::string>>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CorpusError("cannot write " + path.string());
  for (const auto& toks : lines) {
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (i) out << ' ';
      out << toks[i];
    }
    out << '\n';
  }
}

std::filesystem::path source_path(const std::filesystem::path& prefix) { return prefix.string() + ".src"; }
std::filesystem::path target_path(const std::filesystem::path& prefix) { return prefix.string() + ".tgt"; }

std::vector<Sentence> read_sentences(const std::filesystem::path& path, const Vocabulary& vocab, bool allow_empty) {
  std::vector<Sentence> out;
  for (const auto& toks : read_token_lines(path, allow_empty)) out.push_back(vocab.encode(toks));
  return out;
}

void write_sentences(const std::filesystem::path& path, const std::vector<Sentence>& sentences,
                     const Vocabulary& vocab) {
  std::vector<std::vector<std::string>> lines;
  lines.reserve(sentences.size());
  for (const auto& s : sentences) lines.push_back(vocab.decode(s));
  write_token_lines(path, lines);
}

ParallelCorpus read_corpus(const std::filesystem::path& prefix, const Vocabulary& src_vocab,
                           const Vocabulary& tgt_vocab) {
  auto src = read_sentences(source_path(prefix), src_vocab);
  auto tgt = read_sentences(target_path(prefix), tgt_vocab);
  if (src.size() != tgt.size())
    throw CorpusError(prefix.string() + ": source has " + std::to_string(src.size()) + " lines, target has " +
                      std::to_string(tgt.size()));
  ParallelCorpus corpus;
  corpus.pairs.reserve(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) corpus.pairs.push_back({std::move(src[i]), std::move(tgt[i])});
  return corpus;
}

void write_corpus(const std::filesystem::path& prefix, const ParallelCorpus& corpus, const Vocabulary& src_vocab,
                  const Vocabulary& tgt_vocab) {
  std::vector<Sentence> src, tgt;
  for (const auto& p : corpus.pairs) {
    src.push_back(p.src);
    tgt.push_back(p.tgt);
  }
  write_sentences(source_path(prefix), src, src_vocab);
  write_sentences(target_path(prefix), tgt, tgt_vocab);
}

}  // namespace kdseq
