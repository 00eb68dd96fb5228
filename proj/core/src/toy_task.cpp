#include "kdseq/toy_task.hpp"

#include <algorithm>
#include <set>

#include "kdseq/rng.hpp"

namespace kdseq {

void ToyTaskConfig::validate() const {
  if (vocab_size < 1) throw ConfigError("toy task: vocab_size must be positive");
  if (vocab_size < synonym_classes)
    throw ConfigError("toy task: vocab_size (" + std::to_string(vocab_size) + ") < synonym_classes (" +
                      std::to_string(synonym_classes) + ")");
  if (synonym_classes < 1) throw ConfigError("toy task: synonym_classes must be positive");
  if (min_length < 1 || max_length < min_length) throw ConfigError("toy task: invalid sentence length range");
  if (chunk_size < 1) throw ConfigError("toy task: chunk_size must be >= 1");
  if (!(synonym_noise_rate >= 0.0 && synonym_noise_rate <= 0.5))
    throw ConfigError("toy task: synonym_noise_rate must lie in [0, 0.5]");
  if (num_sentences < 1 || num_dev < 1 || num_test < 1) throw ConfigError("toy task: split sizes must be positive");
}

ToyTaskConfig ToyTaskConfig::from_config(const KeyValueConfig& cfg) {
  cfg.require_known({"vocab_size", "min_length", "max_length", "lexicon_seed", "chunk_size", "synonym_noise_rate",
                     "synonym_classes", "num_sentences", "num_dev", "num_test"});
  ToyTaskConfig c;
  if (auto v = cfg.get_int("vocab_size")) c.vocab_size = static_cast<std::size_t>(*v);
  if (auto v = cfg.get_int("min_length")) c.min_length = static_cast<std::size_t>(*v);
  if (auto v = cfg.get_int("max_length")) c.max_length = static_cast<std::size_t>(*v);
  if (auto v = cfg.get_int("lexicon_seed")) c.lexicon_seed = static_cast<std::uint64_t>(*v);
  if (auto v = cfg.get_int("chunk_size")) c.chunk_size = static_cast<std::size_t>(*v);
  if (auto v = cfg.get_double("synonym_noise_rate")) c.synonym_noise_rate = *v;
  if (auto v = cfg.get_int("synonym_classes")) c.synonym_classes = static_cast<std::size_t>(*v);
  if (auto v = cfg.get_int("num_sentences")) c.num_sentences = static_cast<std::size_t>(*v);
  if (auto v = cfg.get_int("num_dev")) c.num_dev = static_cast<std::size_t>(*v);
  if (auto v = cfg.get_int("num_test")) c.num_test = static_cast<std::size_t>(*v);
  c.validate();
  return c;
}

KeyValueConfig ToyTaskConfig::to_config() const {
  KeyValueConfig cfg;
  cfg.set("vocab_size", std::to_string(vocab_size));
  cfg.set("min_length", std::to_string(min_length));
  cfg.set("max_length", std::to_string(max_length));
  cfg.set("lexicon_seed", std::to_string(lexicon_seed));
  cfg.set("chunk_size", std::to_string(chunk_size));
  cfg.set("synonym_noise_rate", std::to_string(synonym_noise_rate));
  cfg.set("synonym_classes", std::to_string(synonym_classes));
  cfg.set("num_sentences", std::to_string(num_sentences));
  cfg.set("num_dev", std::to_string(num_dev));
  cfg.set("num_test", std::to_string(num_test));
  return cfg;
}

Sentence canonical_target(const ToyCorpus& task, const Sentence& src, std::size_t chunk_size) {
  Sentence tgt;
  tgt.reserve(src.size());
  for (TokenId s : src) tgt.push_back(task.lexicon.at(static_cast<std::size_t>(s)));
  for (std::size_t b = 0; b < tgt.size(); b += chunk_size)
    std::reverse(tgt.begin() + static_cast<std::ptrdiff_t>(b),
                 tgt.begin() + static_cast<std::ptrdiff_t>(std::min(tgt.size(), b + chunk_size)));
  return tgt;
}

ToyCorpus generate_toy_corpus(const ToyTaskConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ToyCorpus task;
  const std::size_t V = cfg.vocab_size;
  const auto first = static_cast<TokenId>(Vocabulary::kNumSpecials);

  std::vector<std::string> src_tokens, tgt_tokens;
  for (std::size_t i = 0; i < V; ++i) {
    src_tokens.push_back("s" + std::to_string(i));
    tgt_tokens.push_back("t" + std::to_string(i));
  }
  task.src_vocab = Vocabulary::from_tokens(src_tokens);
  task.tgt_vocab = Vocabulary::from_tokens(tgt_tokens);

  // Lexicon: a seeded bijection between source and target content ids.
  Rng lex_rng(derive_seed(cfg.lexicon_seed, 0));
  std::vector<TokenId> perm(V);
  for (std::size_t i = 0; i < V; ++i) perm[i] = first + static_cast<TokenId>(i);
  lex_rng.shuffle(perm);
  task.lexicon.resize(V + Vocabulary::kNumSpecials);
  for (std::size_t i = 0; i < Vocabulary::kNumSpecials; ++i) task.lexicon[i] = static_cast<TokenId>(i);
  for (std::size_t i = 0; i < V; ++i) task.lexicon[Vocabulary::kNumSpecials + i] = perm[i];

  // Synonym classes partition the target content ids.
  Rng class_rng(derive_seed(cfg.lexicon_seed, 1));
  std::vector<TokenId> order(V);
  for (std::size_t i = 0; i < V; ++i) order[i] = first + static_cast<TokenId>(i);
  class_rng.shuffle(order);
  task.synonym_class.assign(V + Vocabulary::kNumSpecials, -1);
  std::vector<std::vector<TokenId>> members(cfg.synonym_classes);
  for (std::size_t i = 0; i < V; ++i) {
    const std::size_t c = i % cfg.synonym_classes;
    task.synonym_class[static_cast<std::size_t>(order[i])] = static_cast<int>(c);
    members[c].push_back(order[i]);
  }
  for (auto& m : members) std::sort(m.begin(), m.end());

  std::set<SentencePair> seen_pairs;
  auto seen = [&](const SentencePair& p) { return !seen_pairs.insert(p).second; };

  std::uint64_t index = 0;
  auto fill = [&](ParallelCorpus& split, std::size_t count) {
    while (split.size() < count) {
      Rng rng(derive_seed(seed, index++));
      const std::size_t len = cfg.min_length + rng.index(cfg.max_length - cfg.min_length + 1);
      SentencePair pair;
      pair.src.resize(len);
      for (auto& t : pair.src) t = first + static_cast<TokenId>(rng.index(V));
      pair.tgt = canonical_target(task, pair.src, cfg.chunk_size);
      std::size_t noised = 0;
      for (auto& t : pair.tgt) {
        if (!rng.bernoulli(cfg.synonym_noise_rate)) continue;
        const auto& cls = members[static_cast<std::size_t>(task.synonym_class[static_cast<std::size_t>(t)])];
        if (cls.size() < 2) continue;
        // uniform over the other members of the class
        std::size_t pick = rng.index(cls.size() - 1);
        const auto self = static_cast<std::size_t>(std::find(cls.begin(), cls.end(), t) - cls.begin());
        if (pick >= self) ++pick;
        t = cls[pick];
        ++noised;
      }
      if (seen(pair)) continue;
      task.noised_tokens += noised;
      task.target_tokens += pair.tgt.size();
      split.pairs.push_back(std::move(pair));
    }
  };
  fill(task.train, cfg.num_sentences);
  fill(task.dev, cfg.num_dev);
  fill(task.test, cfg.num_test);
  return task;
}

}  // namespace kdseq
