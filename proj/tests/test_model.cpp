#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "kdseq/batch.hpp"
#include "kdseq/checkpoint.hpp"
#include "kdseq/losses.hpp"
#include "kdseq/model.hpp"
#include "kdseq/rng.hpp"
#include "support.hpp"

using namespace kdseq;

namespace {

ModelConfig tiny(std::size_t layers = 2, std::size_t hidden = 6) {
  return ModelConfig{layers, hidden, hidden, 12, 10, 0.0};
}

ParallelCorpus corpus_of(std::uint64_t seed, std::size_t n, const ModelConfig& cfg) {
  Rng rng(seed);
  return kdseq::testing::random_corpus(rng, n, cfg.src_vocab_size, cfg.tgt_vocab_size);
}

Batch whole(const ParallelCorpus& c) {
  std::vector<std::size_t> idx(c.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return make_batch(c, idx);
}

}  // namespace

TEST(ModelParams, LayoutNamesAndCount) {
  const ModelConfig cfg = tiny();
  const auto m = init_params(cfg, 1);
  const auto layout = parameter_layout(cfg);
  EXPECT_EQ(m.params.num_tensors(), layout.size());
  std::size_t total = 0;
  for (const auto& [name, shape] : layout) {
    ASSERT_TRUE(m.params.contains(name)) << name;
    EXPECT_EQ(m.params.at(name).shape(), shape) << name;
    total += shape_size(shape);
  }
  EXPECT_EQ(m.parameter_count(), total);
  EXPECT_EQ(m.params.at("dec.0.W_feed").shape(), (Shape{6, 24}));
  EXPECT_EQ(m.params.at("enc.1.W_x").shape(), (Shape{6, 24}));
  EXPECT_EQ(m.params.at("attn.W_c").shape(), (Shape{12, 6}));
}

TEST(ModelParams, InitIsDeterministicAndBounded) {
  const auto a = init_params(tiny(), 7, 0.2);
  const auto b = init_params(tiny(), 7, 0.2);
  for (const auto& [name, t] : a.params) {
    const auto& u = b.params.at(name);
    EXPECT_TRUE(std::equal(t.values().begin(), t.values().end(), u.values().begin())) << name;
    for (double v : t.values()) EXPECT_LE(std::abs(v), 1.0);
  }
  const auto& bias = a.params.at("enc.0.b");
  for (std::size_t k = 0; k < 24; ++k) EXPECT_EQ(bias[k], (k >= 6 && k < 12) ? 1.0 : 0.0);
  for (double v : a.params.at("enc.0.W_x").values()) EXPECT_LE(std::abs(v), 0.2);
}

TEST(ModelParams, ZeroRangeGivesZeroWeights) {
  const auto m = init_params(tiny(), 3, 0.0);
  for (const auto& [name, t] : m.params) {
    if (name.size() > 2 && name.substr(name.size() - 2) == ".b" && name.rfind("out", 0) != 0) continue;
    for (double v : t.values()) EXPECT_EQ(v, 0.0) << name;
  }
}

TEST(ModelConfig, ValidateRejectsBadValues) {
  ModelConfig cfg = tiny();
  cfg.hidden = 0;
  EXPECT_ANY_THROW(cfg.validate());
  cfg = tiny();
  cfg.dropout_rate = 1.0;
  EXPECT_ANY_THROW(cfg.validate());
}

TEST(Encoder, ShapesAndBatchConsistency) {
  const ModelConfig cfg = tiny();
  const auto m = init_params(cfg, 2, 0.5);
  ParallelCorpus c;
  c.pairs.push_back({{4, 5, 6}, {4}});
  c.pairs.push_back({{4, 5, 6}, {5}});
  c.pairs.push_back({{7}, {6}});
  const Batch b = whole(c);
  const EncodedSource enc = encode(m, b);
  EXPECT_EQ(enc.annotations.shape(), (Shape{3, 3, 6}));
  for (std::size_t i = 0; i < 18; ++i) EXPECT_EQ(enc.annotations[i], enc.annotations[18 + i]);

  const std::vector<std::size_t> one{2};
  const EncodedSource single = encode(m, make_batch(c, one));
  EXPECT_EQ(single.annotations.shape(), (Shape{1, 1, 6}));
}

TEST(Encoder, RejectsOutOfRangeIds) {
  const auto m = init_params(tiny(), 2);
  ParallelCorpus c;
  c.pairs.push_back({{40}, {4}});
  EXPECT_ANY_THROW(encode(m, whole(c)));
}

TEST(Encoder, ZeroWeightsGiveZeroAnnotations) {
  const auto m = init_params(tiny(), 2, 0.0);
  ParallelCorpus c;
  c.pairs.push_back({{4, 5, 6, 7}, {4}});
  const auto enc = encode(m, whole(c));
  for (double v : enc.annotations.values()) EXPECT_EQ(v, 0.0);
}

TEST(Decoder, AttentionIsADistributionOverRealTokens) {
  const auto m = init_params(tiny(), 4, 0.5);
  ParallelCorpus c;
  c.pairs.push_back({{4, 5, 6, 7}, {4, 5}});
  c.pairs.push_back({{8}, {6, 7}});
  const auto out = forward_teacher_forced(m, whole(c));
  ASSERT_EQ(out.attention.size(), 3u);
  for (const auto& a : out.attention) {
    double z0 = 0;
    for (std::size_t i = 0; i < 4; ++i) z0 += a[i];
    EXPECT_NEAR(z0, 1.0, 1e-12);
    EXPECT_NEAR(a[4], 1.0, 1e-12);  // single source position
    for (std::size_t i = 5; i < 8; ++i) EXPECT_NEAR(a[i], 0.0, 1e-12);
  }
}

TEST(Decoder, StepIsPure) {
  const auto m = init_params(tiny(), 4, 0.5);
  ParallelCorpus c;
  c.pairs.push_back({{4, 5, 6}, {4}});
  auto enc = std::make_shared<const EncodedSource>(encode(m, whole(c)));
  const auto s0 = initial_decoder_state(m, enc);
  const std::vector<TokenId> prev{Vocabulary::kBos};
  const auto a = decode_step(m, s0, prev);
  const auto b = decode_step(m, s0, prev);
  EXPECT_TRUE(std::equal(a.log_dist.values().begin(), a.log_dist.values().end(), b.log_dist.values().begin()));
  double z = 0;
  for (double l : a.log_dist.values()) z += std::exp(l);
  EXPECT_NEAR(z, 1.0, 1e-12);
}

TEST(Checkpoint, RoundTripIsExact) {
  const auto dir = std::filesystem::temp_directory_path() / "kdseq_test_ckpt";
  std::filesystem::create_directories(dir);
  const auto m = init_params(tiny(), 9, 0.3);
  save_checkpoint(dir / "m.ckpt", m, {0x1234, 0xabcd});
  const auto back = load_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(back.model.config, m.config);
  EXPECT_EQ(back.meta.src_vocab_checksum, 0x1234u);
  EXPECT_EQ(back.meta.tgt_vocab_checksum, 0xabcdu);
  for (const auto& [name, t] : m.params) {
    const auto& u = back.model.params.at(name);
    EXPECT_TRUE(std::equal(t.values().begin(), t.values().end(), u.values().begin())) << name;
  }
}

TEST(Checkpoint, TruncatedFileIsRejected) {
  const auto dir = std::filesystem::temp_directory_path() / "kdseq_test_ckpt";
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / "t.ckpt", init_params(tiny(), 1), {});
  std::filesystem::resize_file(dir / "t.ckpt", 200);
  EXPECT_THROW(load_checkpoint(dir / "t.ckpt"), CheckpointError);
  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), CheckpointError);
}

TEST(Losses, UniformModel) {
  const ModelConfig cfg{1, 4, 4, 12, 50, 0.0};
  const auto m = init_params(cfg, 1, 0.0);
  ParallelCorpus c;
  c.pairs.push_back({{4, 5}, {4, 5, 6}});
  const auto loss = word_nll_loss(m, whole(c));
  EXPECT_EQ(loss.tokens, 4u);
  EXPECT_NEAR(loss.sum(), 4 * std::log(50.0), 1e-9);
  EXPECT_NEAR(loss.per_token_mean(), std::log(50.0), 1e-12);
  const Sentence tgt{4, 5, 6, Vocabulary::kEos};
  EXPECT_NEAR(sequence_logprob(m, c.pairs[0].src, tgt), -4 * std::log(50.0), 1e-9);
  EXPECT_NEAR(perplexity(m, c), 50.0, 1e-9);
}

TEST(Losses, BatchDecomposesIntoSentences) {
  const ModelConfig cfg = tiny();
  const auto m = init_params(cfg, 5, 0.5);
  const auto c = corpus_of(3, 2, cfg);
  const auto both = word_nll_loss(m, whole(c));
  double separate = 0.0;
  for (std::size_t i = 0; i < 2; ++i) {
    const std::vector<std::size_t> idx{i};
    const auto one = word_nll_loss(m, make_batch(c, idx));
    EXPECT_NEAR(both.per_sentence[i], one.sum(), 1e-9);
    separate += one.sum();
  }
  EXPECT_NEAR(both.sum(), separate, 1e-9);
}

TEST(Losses, NllMatchesNegativeSequenceLogprob) {
  const ModelConfig cfg = tiny();
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto m = init_params(cfg, 100 + s, 0.6);
    const auto c = corpus_of(200 + s, 4, cfg);
    const auto loss = word_nll_loss(m, whole(c));
    for (std::size_t i = 0; i < c.size(); ++i) {
      Sentence t = c.pairs[i].tgt;
      t.push_back(Vocabulary::kEos);
      EXPECT_NEAR(-sequence_logprob(m, c.pairs[i].src, t), loss.per_sentence[i], 1e-6);
    }
  }
}

TEST(Losses, WeightsScaleSentences) {
  const ModelConfig cfg = tiny();
  const auto m = init_params(cfg, 5, 0.5);
  auto c = corpus_of(3, 2, cfg);
  const double plain = word_nll_loss(m, whole(c)).sum();
  c.weights = {0.5, 0.5};
  EXPECT_NEAR(word_nll_loss(m, whole(c)).sum(), 0.5 * plain, 1e-9);
}

TEST(WordKd, AlphaZeroIsNll) {
  const ModelConfig cfg = tiny();
  const auto student = init_params(cfg, 1, 0.5), teacher = init_params(cfg, 2, 0.5);
  const Batch b = whole(corpus_of(4, 3, cfg));
  EXPECT_EQ(word_kd_loss(student, teacher, b, 0.0, 1.0).sum(), word_nll_loss(student, b).sum());
}

TEST(WordKd, LinearInAlpha) {
  const ModelConfig cfg = tiny();
  const auto student = init_params(cfg, 1, 0.5), teacher = init_params(cfg, 2, 0.8);
  const Batch b = whole(corpus_of(4, 3, cfg));
  for (double tau : {1.0, 2.0}) {
    const double l0 = word_kd_loss(student, teacher, b, 0.0, tau).sum();
    const double l1 = word_kd_loss(student, teacher, b, 1.0, tau).sum();
    for (double a : {0.25, 0.5, 0.9})
      EXPECT_NEAR(word_kd_loss(student, teacher, b, a, tau).sum(), (1 - a) * l0 + a * l1, 1e-9);
  }
}

TEST(WordKd, SelfDistillationIsTeacherEntropy) {
  const ModelConfig cfg = tiny();
  const auto model = init_params(cfg, 3, 0.7);
  const Batch b = whole(corpus_of(5, 2, cfg));
  const auto out = forward_teacher_forced(model, b);
  const Tensor logp = log_softmax(out.logits, 1);
  double entropy = 0.0;
  for (std::size_t j = 0; j < out.steps; ++j)
    for (std::size_t s = 0; s < out.batch; ++s) {
      if (b.tgt_out_at(s, j) == Vocabulary::kPad) continue;
      const std::size_t row = j * out.batch + s;
      for (std::size_t k = 0; k < cfg.tgt_vocab_size; ++k) {
        const double lp = logp[row * cfg.tgt_vocab_size + k];
        entropy -= std::exp(lp) * lp;
      }
    }
  EXPECT_NEAR(word_kd_loss(model, model, b, 1.0, 1.0).sum(), entropy, 1e-9);
}

TEST(WordKd, HighTemperatureApproachesUniform) {
  const ModelConfig cfg = tiny();
  const auto student = init_params(cfg, 1, 0.5), teacher = init_params(cfg, 2, 0.5);
  const Batch b = whole(corpus_of(4, 3, cfg));
  const auto loss = word_kd_loss(student, teacher, b, 1.0, 1e6);
  EXPECT_NEAR(loss.per_token_mean(), std::log(double(cfg.tgt_vocab_size)), 1e-5);
}

TEST(WordKd, TeacherReceivesNoGradient) {
  const ModelConfig cfg = tiny();
  auto student = init_params(cfg, 1, 0.5);
  auto teacher = init_params(cfg, 2, 0.5);
  student.params.set_requires_grad(true);
  teacher.params.set_requires_grad(true);
  const Batch b = whole(corpus_of(4, 3, cfg));
  {
    Tape tape;
    TapeScope scope(tape);
    tape.backward(word_kd_loss(student, teacher, b, 0.5, 2.0).total);
  }
  for (const auto& [name, t] : teacher.params) EXPECT_FALSE(t.has_grad()) << name;
  bool any = false;
  for (const auto& [name, t] : student.params)
    for (double g : t.grad()) any = any || g != 0.0;
  EXPECT_TRUE(any);
}

TEST(WordKd, VocabularyMismatchIsAnError) {
  const auto student = init_params(tiny(), 1);
  ModelConfig other = tiny();
  other.tgt_vocab_size = 11;
  const auto teacher = init_params(other, 1);
  EXPECT_ANY_THROW(word_kd_loss(student, teacher, whole(corpus_of(1, 2, tiny())), 0.5, 1.0));
}

TEST(WordKd, GradientMatchesFiniteDifferences) {
  const ModelConfig cfg{1, 4, 4, 8, 7, 0.0};
  auto student = init_params(cfg, 21, 0.5);
  const auto teacher = init_params(cfg, 22, 0.8);
  const Batch b = whole(corpus_of(23, 2, cfg));
  std::vector<Tensor*> leaves;
  for (auto& [name, t] : student.params) leaves.push_back(&t);
  const auto checks = kdseq::testing::check_gradients(
      [&] { return word_kd_loss(student, teacher, b, 0.5, 2.0).total; }, leaves);
  std::size_t i = 0;
  for (const auto& [name, t] : student.params) EXPECT_LT(checks[i++].norm_rel_error(), 1e-4) << name;
}
