#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "kdseq/batch.hpp"
#include "kdseq/corpus.hpp"
#include "kdseq/kv_config.hpp"
#include "kdseq/rng.hpp"
#include "kdseq/toy_task.hpp"
#include "kdseq/vocab.hpp"

using namespace kdseq;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("kdseq_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ToyTaskConfig small_toy() {
  ToyTaskConfig cfg;
  cfg.num_sentences = 200;
  cfg.num_dev = 20;
  cfg.num_test = 20;
  return cfg;
}

}  // namespace

TEST(KeyValueConfig, ParsesCommentsAndTypes) {
  std::istringstream in("# comment\n\nlayers = 2\nrate=0.5\nflag = true\nname =  abc \n");
  const auto cfg = KeyValueConfig::parse(in);
  EXPECT_EQ(cfg.get_int("layers"), 2);
  EXPECT_DOUBLE_EQ(*cfg.get_double("rate"), 0.5);
  EXPECT_EQ(cfg.get_bool("flag"), true);
  EXPECT_EQ(cfg.get_string("name"), "abc");
  EXPECT_FALSE(cfg.get_int("missing").has_value());
}

TEST(KeyValueConfig, Errors) {
  std::istringstream dup("a = 1\na = 2\n");
  EXPECT_THROW(KeyValueConfig::parse(dup), ConfigError);
  std::istringstream bad("no equals sign\n");
  EXPECT_THROW(KeyValueConfig::parse(bad), ConfigError);
  std::istringstream ok("a = x\nb = 1\n");
  const auto cfg = KeyValueConfig::parse(ok);
  EXPECT_THROW(cfg.get_int("a"), ConfigError);
  EXPECT_THROW(cfg.require_known({"a"}), ConfigError);
  EXPECT_NO_THROW(cfg.require_known({"a", "b"}));
}

TEST(KeyValueConfig, RoundTrip) {
  std::istringstream in("b = 2\na = one\n");
  const auto cfg = KeyValueConfig::parse(in);
  std::istringstream again(cfg.to_string());
  EXPECT_EQ(KeyValueConfig::parse(again).entries(), cfg.entries());
}

TEST(SplitList, TrimsItems) {
  EXPECT_EQ(split_list(" a, b ,c"), (std::vector<std::string>{"a", "b", "c"}));
}

TEST(Vocabulary, SpecialsComeFirst) {
  const Vocabulary v;
  EXPECT_EQ(v.size(), 4u);
  EXPECT_EQ(v.token(Vocabulary::kPad), "<pad>");
  EXPECT_EQ(v.token(Vocabulary::kUnk), "<unk>");
  EXPECT_EQ(v.token(Vocabulary::kBos), "<s>");
  EXPECT_EQ(v.token(Vocabulary::kEos), "</s>");
}

TEST(Vocabulary, BuildExamples) {
  const auto v1 = build_vocab({{"a", "a", "b"}}, 6);
  EXPECT_EQ(v1.size(), 6u);
  EXPECT_EQ(v1.token(4), "a");
  EXPECT_EQ(v1.token(5), "b");

  const auto v2 = build_vocab({{"a", "b", "b", "c"}}, 5);
  EXPECT_EQ(v2.size(), 5u);
  EXPECT_EQ(v2.token(4), "b");
  EXPECT_EQ(v2.id("a"), Vocabulary::kUnk);
  EXPECT_EQ(v2.id("c"), Vocabulary::kUnk);

  const auto v3 = build_vocab({{"x", "y", "y"}}, 4);
  EXPECT_EQ(v3.size(), 4u);
  EXPECT_EQ(v3.encode({"x", "y"}), (std::vector<TokenId>{Vocabulary::kUnk, Vocabulary::kUnk}));
}

TEST(Vocabulary, FrequencyTiesAreLexicographic) {
  const auto v = build_vocab({{"d", "c", "b", "a", "c", "b"}}, 6);
  EXPECT_EQ(v.token(4), "b");
  EXPECT_EQ(v.token(5), "c");
}

TEST(Vocabulary, EmptyCorpusIsAnError) { EXPECT_ANY_THROW(build_vocab({}, 10)); }

TEST(Vocabulary, Bijection) {
  const auto v = Vocabulary::from_tokens({"x", "y", "z"});
  for (const std::string tok : {"x", "y", "z", "</s>"}) EXPECT_EQ(v.token(v.id(tok)), tok);
  EXPECT_EQ(v.id("nope"), Vocabulary::kUnk);
  EXPECT_ANY_THROW(Vocabulary::from_tokens({"x", "x"}));
  EXPECT_ANY_THROW(Vocabulary::from_tokens({"<s>"}));
}

TEST(Vocabulary, SaveLoadAndChecksum) {
  const auto dir = scratch_dir("vocab");
  const auto v = Vocabulary::from_tokens({"alpha", "beta"});
  v.save(dir / "v.txt");
  const auto w = Vocabulary::load(dir / "v.txt");
  EXPECT_EQ(v, w);
  EXPECT_EQ(v.checksum(), w.checksum());
  EXPECT_NE(v.checksum(), Vocabulary::from_tokens({"beta", "alpha"}).checksum());
}

TEST(Corpus, WriteReadRoundTrip) {
  const auto dir = scratch_dir("corpus");
  const ToyCorpus toy = generate_toy_corpus(small_toy(), 3);
  write_corpus(dir / "train", toy.train, toy.src_vocab, toy.tgt_vocab);
  const auto back = read_corpus(dir / "train", toy.src_vocab, toy.tgt_vocab);
  EXPECT_EQ(back, toy.train);
}

TEST(Corpus, BlankLineCitesLineNumber) {
  const auto dir = scratch_dir("blank");
  {
    std::ofstream out(dir / "x.src");
    for (int i = 1; i <= 9; ++i) out << (i == 7 ? "   " : "a b") << "\n";
  }
  try {
    read_token_lines(dir / "x.src");
    FAIL() << "expected CorpusError";
  } catch (const CorpusError& e) {
    EXPECT_NE(std::string(e.what()).find("7"), std::string::npos) << e.what();
  }
  EXPECT_EQ(read_token_lines(dir / "x.src", true).at(6).size(), 0u);
}

TEST(Corpus, MismatchedLineCounts) {
  const auto dir = scratch_dir("mismatch");
  const auto v = Vocabulary::from_tokens({"a"});
  std::ofstream(dir / "p.src") << "a\na\n";
  std::ofstream(dir / "p.tgt") << "a\n";
  EXPECT_THROW(read_corpus(dir / "p", v, v), CorpusError);
}

TEST(Corpus, ValidateRejectsOutOfRangeIds) {
  ParallelCorpus c;
  c.pairs.push_back({{4, 5}, {4}});
  EXPECT_NO_THROW(c.validate(6, 5));
  EXPECT_THROW(c.validate(5, 5), CorpusError);
  c.pairs.push_back({{}, {4}});
  EXPECT_THROW(c.validate(6, 5), CorpusError);
}

TEST(Rng, DeterministicAndBounded) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
  Rng r(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(r.index(7), 7u);
  }
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_EQ(derive_seed(5, 3), derive_seed(5, 3));
}

TEST(ToyTask, DeterministicInSeed) {
  const auto a = generate_toy_corpus(small_toy(), 9);
  const auto b = generate_toy_corpus(small_toy(), 9);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.dev, b.dev);
  EXPECT_EQ(a.test, b.test);
  EXPECT_EQ(a.src_vocab, b.src_vocab);
  const auto c = generate_toy_corpus(small_toy(), 10);
  EXPECT_NE(a.train, c.train);
}

TEST(ToyTask, NoiselessIsRelabeledSource) {
  ToyTaskConfig cfg = small_toy();
  cfg.synonym_noise_rate = 0.0;
  cfg.chunk_size = 1;
  const auto toy = generate_toy_corpus(cfg, 2);
  for (const auto& p : toy.train.pairs) {
    ASSERT_EQ(p.src.size(), p.tgt.size());
    for (std::size_t i = 0; i < p.src.size(); ++i) EXPECT_EQ(p.tgt[i], toy.lexicon[p.src[i]]);
  }
}

TEST(ToyTask, ChunkReversal) {
  ToyTaskConfig cfg = small_toy();
  cfg.synonym_noise_rate = 0.0;
  const auto toy = generate_toy_corpus(cfg, 2);
  for (const auto& p : toy.train.pairs) EXPECT_EQ(p.tgt, canonical_target(toy, p.src, cfg.chunk_size));
  const Sentence src{4, 5, 6, 7, 8};
  const Sentence t = canonical_target(toy, src, 3);
  EXPECT_EQ(t, (Sentence{toy.lexicon[6], toy.lexicon[5], toy.lexicon[4], toy.lexicon[8], toy.lexicon[7]}));
}

TEST(ToyTask, NoiseFractionAndSynonymClasses) {
  ToyTaskConfig cfg;  // 10k training sentences, noise 0.1
  const auto toy = generate_toy_corpus(cfg, 1);
  const double frac = double(toy.noised_tokens) / double(toy.target_tokens);
  EXPECT_GE(frac, 0.09);
  EXPECT_LE(frac, 0.11);
  // noise only ever swaps within a synonym class
  for (const auto& p : toy.train.pairs) {
    const Sentence canon = canonical_target(toy, p.src, cfg.chunk_size);
    ASSERT_EQ(canon.size(), p.tgt.size());
    for (std::size_t i = 0; i < canon.size(); ++i)
      EXPECT_EQ(toy.synonym_class[p.tgt[i]], toy.synonym_class[canon[i]]);
  }
}

TEST(ToyTask, SplitsAreDisjointAndSized) {
  const auto toy = generate_toy_corpus(small_toy(), 4);
  EXPECT_EQ(toy.train.size(), 200u);
  EXPECT_EQ(toy.dev.size(), 20u);
  EXPECT_EQ(toy.test.size(), 20u);
  std::set<Sentence> train_src;
  for (const auto& p : toy.train.pairs) train_src.insert(p.src);
  for (const auto& p : toy.dev.pairs) EXPECT_FALSE(train_src.count(p.src));
  for (const auto& p : toy.test.pairs) EXPECT_FALSE(train_src.count(p.src));
  for (const auto& p : toy.train.pairs) {
    EXPECT_GE(p.src.size(), 5u);
    EXPECT_LE(p.src.size(), 15u);
  }
}

TEST(ToyTask, ValidateRejectsTooFewTokensForClasses) {
  ToyTaskConfig cfg;
  cfg.vocab_size = 10;
  cfg.synonym_classes = 30;
  EXPECT_ANY_THROW(cfg.validate());
}

TEST(Batch, PartitionSizes) {
  ParallelCorpus c;
  for (int i = 0; i < 5; ++i) c.pairs.push_back({{4}, {4}});
  const auto plan = plan_batches(c, 2, false, std::nullopt);
  ASSERT_EQ(plan.size(), 3u);
  EXPECT_EQ(plan[0].size(), 2u);
  EXPECT_EQ(plan[1].size(), 2u);
  EXPECT_EQ(plan[2].size(), 1u);
}

TEST(Batch, ShiftByOne) {
  ParallelCorpus c;
  c.pairs.push_back({{4, 5, 6}, {7, 8}});
  c.pairs.push_back({{4}, {9}});
  const std::vector<std::size_t> idx{0, 1};
  const Batch b = make_batch(c, idx);
  EXPECT_EQ(b.tgt_len, 3u);
  EXPECT_EQ(b.src_len, 3u);
  EXPECT_EQ(b.tgt_in_at(0, 0), Vocabulary::kBos);
  EXPECT_EQ(b.tgt_in_at(0, 1), 7);
  EXPECT_EQ(b.tgt_in_at(0, 2), 8);
  EXPECT_EQ(b.tgt_out_at(0, 0), 7);
  EXPECT_EQ(b.tgt_out_at(0, 1), 8);
  EXPECT_EQ(b.tgt_out_at(0, 2), Vocabulary::kEos);
  EXPECT_EQ(b.tgt_out_at(1, 1), Vocabulary::kEos);
  EXPECT_EQ(b.tgt_out_at(1, 2), Vocabulary::kPad);
  EXPECT_EQ(b.src_at(1, 1), Vocabulary::kPad);
  EXPECT_EQ(b.target_tokens(), 5u);
}

TEST(Batch, ShuffledPlansAreDeterministicPermutations) {
  const auto toy = generate_toy_corpus(small_toy(), 5);
  const auto a = plan_batches(toy.train, 16, true, 7);
  const auto b = plan_batches(toy.train, 16, true, 7);
  EXPECT_EQ(a, b);
  std::vector<std::size_t> all;
  for (const auto& batch : a) all.insert(all.end(), batch.begin(), batch.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], i);
  EXPECT_NE(a, plan_batches(toy.train, 16, true, 8));
}
