#include "kdseq/distill.hpp"

#include <cmath>
#include <stdexcept>

#include "kdseq/bleu.hpp"
#include "kdseq/seq2seq_scorer.hpp"

namespace kdseq {

GeneratedCorpus generate_seq_kd_corpus(const Seq2SeqModel& teacher, const ParallelCorpus& corpus, std::size_t beam,
                                       DecodeConfig decode) {
  if (beam < 1) throw std::invalid_argument("seq-kd: beam must be >= 1");
  decode.beam = beam;
  const Seq2SeqScorer scorer(teacher);
  GeneratedCorpus out;
  out.corpus.pairs.reserve(corpus.size());
  for (const auto& pair : corpus.pairs) {
    const KBestList kbest = beam_search(scorer, pair.src, decode);
    const Hypothesis& best = kbest.best_output();
    if (!best.finished) ++out.fallbacks;
    Sentence tgt = best.output();
    // An immediate </s> leaves nothing to store; keep the gold target so
    // the corpus stays well formed.
    if (tgt.empty()) {
      ++out.fallbacks;
      out.corpus.pairs.push_back(pair);
      out.logprobs.push_back(sequence_logprob(teacher, pair.src, [&] {
        Sentence t = pair.tgt;
        t.push_back(Vocabulary::kEos);
        return t;
      }()));
      continue;
    }
    out.corpus.pairs.push_back({pair.src, std::move(tgt)});
    out.logprobs.push_back(best.logprob);
  }
  return out;
}

std::size_t select_seq_inter_index(const KBestList& kbest, std::span<const TokenId> gold) {
  if (kbest.empty()) throw std::invalid_argument("select_seq_inter: empty K-best list");
  std::size_t best = 0;
  double best_sim = -1.0;
  for (std::size_t i = 0; i < kbest.size(); ++i) {
    const Hypothesis& h = kbest.hypotheses[i];
    const Sentence out = h.output();
    const double sim = smoothed_sentence_bleu(out, gold).score;
    if (i == 0 || sim > best_sim) {
      best = i;
      best_sim = sim;
      continue;
    }
    if (sim < best_sim) continue;
    const Hypothesis& b = kbest.hypotheses[best];
    if (h.logprob > b.logprob || (h.logprob == b.logprob && out < b.output())) best = i;
  }
  return best;
}

Sentence select_seq_inter(const KBestList& kbest, std::span<const TokenId> gold) {
  return kbest.hypotheses[select_seq_inter_index(kbest, gold)].output();
}

GeneratedCorpus generate_seq_inter_corpus(const Seq2SeqModel& teacher, const ParallelCorpus& corpus,
                                          std::size_t beam, double fraction, DecodeConfig decode) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("seq-inter: fraction must lie in (0, 1]");
  if (beam < 1) throw std::invalid_argument("seq-inter: beam must be >= 1");
  decode.beam = beam;
  const auto count = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(corpus.size()) - 1e-9));
  const Seq2SeqScorer scorer(teacher);
  GeneratedCorpus out;
  for (std::size_t i = 0; i < std::min(count, corpus.size()); ++i) {
    const auto& pair = corpus.pairs[i];
    const KBestList kbest = beam_search(scorer, pair.src, decode);
    const std::size_t pick = select_seq_inter_index(kbest, pair.tgt);
    const Hypothesis& h = kbest.hypotheses[pick];
    if (!h.finished) ++out.fallbacks;
    Sentence tgt = h.output();
    if (tgt.empty()) {
      ++out.fallbacks;
      out.corpus.pairs.push_back(pair);
      Sentence t = pair.tgt;
      t.push_back(Vocabulary::kEos);
      out.logprobs.push_back(sequence_logprob(teacher, pair.src, t));
      continue;
    }
    out.corpus.pairs.push_back({pair.src, std::move(tgt)});
    out.logprobs.push_back(h.logprob);
  }
  return out;
}

GeneratedCorpus generate_kbest_corpus(const Seq2SeqModel& teacher, const ParallelCorpus& corpus, std::size_t beam,
                                      DecodeConfig decode) {
  decode.beam = beam;
  const Seq2SeqScorer scorer(teacher);
  GeneratedCorpus out;
  for (const auto& pair : corpus.pairs) {
    const KBestList kbest = beam_search(scorer, pair.src, decode);
    const std::vector<double> w = renormalize_kbest(kbest);
    for (std::size_t i = 0; i < kbest.size(); ++i) {
      Sentence tgt = kbest.hypotheses[i].output();
      if (tgt.empty()) continue;
      out.corpus.pairs.push_back({pair.src, std::move(tgt)});
      out.corpus.weights.push_back(w[i]);
      out.logprobs.push_back(kbest.hypotheses[i].logprob);
    }
  }
  return out;
}

GeneratedCorpus generate_sampled_corpus(const Seq2SeqModel& teacher, const ParallelCorpus& corpus,
                                        std::size_t samples, std::uint64_t seed, DecodeConfig decode) {
  if (samples < 1) throw std::invalid_argument("sampled corpus: samples must be >= 1");
  const Seq2SeqScorer scorer(teacher);
  GeneratedCorpus out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& pair = corpus.pairs[i];
    for (std::size_t s = 0; s < samples; ++s) {
      const Hypothesis h = sample_sequence(scorer, pair.src, decode, derive_seed(seed, i * samples + s));
      Sentence tgt = h.output();
      if (tgt.empty()) continue;
      out.corpus.pairs.push_back({pair.src, std::move(tgt)});
      out.corpus.weights.push_back(1.0 / static_cast<double>(samples));
      out.logprobs.push_back(h.logprob);
    }
  }
  return out;
}

TrainResult fine_tune(const Seq2SeqModel& model, const ParallelCorpus& train_corpus, const ParallelCorpus& dev_corpus,
                      const LossFn& loss_fn, const FineTuneConfig& ft, const TrainConfig& base,
                      const TrainHooks& hooks) {
  TrainConfig cfg = base;
  cfg.learning_rate = ft.learning_rate;
  cfg.lr_decay = 1.0;
  cfg.decay_trigger = DecayTrigger::DevPplWorse;
  cfg.epochs = ft.max_epochs;
  cfg.stop_after_stalls = ft.stall_epochs;
  return train(model.clone(), train_corpus, dev_corpus, loss_fn, cfg, hooks);
}

}  // namespace kdseq
