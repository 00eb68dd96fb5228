#include "kdseq/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>

#include "kdseq/bench.hpp"
#include "kdseq/bleu.hpp"
#include "kdseq/checkpoint.hpp"
#include "kdseq/prune.hpp"
#include "kdseq/recipe.hpp"
#include "kdseq/seq2seq_scorer.hpp"

namespace kdseq {

namespace {

namespace fs = std::filesystem;

struct Vocabs {
  Vocabulary src, tgt;
};

Vocabs load_vocabs(const fs::path& dir) {
  return {Vocabulary::load(dir / "vocab.src"), Vocabulary::load(dir / "vocab.tgt")};
}

fs::path dir_of(const fs::path& p) {
  const fs::path parent = p.parent_path();
  return parent.empty() ? fs::path(".") : parent;
}

CheckpointMeta meta_of(const Vocabs& v) { return {v.src.checksum(), v.tgt.checksum()}; }

Seq2SeqModel load_model(const fs::path& path, const Vocabs& v) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.meta.src_vocab_checksum != v.src.checksum() || ck.meta.tgt_vocab_checksum != v.tgt.checksum())
    throw std::runtime_error(path.string() + ": checkpoint was trained with different vocabularies");
  return std::move(ck.model);
}

fs::path weights_path(const fs::path& prefix) { return prefix.string() + ".weights"; }

ParallelCorpus load_corpus(const fs::path& prefix, const Vocabs& v) {
  ParallelCorpus c = read_corpus(prefix, v.src, v.tgt);
  if (fs::exists(weights_path(prefix))) {
    std::ifstream in(weights_path(prefix));
    double w;
    while (in >> w) c.weights.push_back(w);
    if (c.weights.size() != c.size()) throw CorpusError(weights_path(prefix).string() + ": one weight per line needed");
  }
  return c;
}

void save_corpus(const fs::path& prefix, const ParallelCorpus& c, const Vocabs& v) {
  if (!prefix.parent_path().empty()) fs::create_directories(prefix.parent_path());
  write_corpus(prefix, c, v.src, v.tgt);
  if (!c.weights.empty()) {
    std::ofstream out(weights_path(prefix), std::ios::binary);
    char buf[32];
    for (double w : c.weights) {
      std::snprintf(buf, sizeof buf, "%.17g\n", w);
      out << buf;
    }
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

KeyValueConfig load_or_empty(const std::optional<std::string>& path) {
  return path ? KeyValueConfig::load(*path) : KeyValueConfig{};
}

struct DecodeFlags {
  std::optional<std::size_t> max_len;
  std::optional<double> length_cap_ratio;

  void add(CLI::App* app) {
    app->add_option("--max-len", max_len, "Output length limit (default 50)");
    app->add_option("--length-cap-ratio", length_cap_ratio,
                    "Output cap as a multiple of source length, <= 0 disables (default 2)");
  }
  DecodeConfig apply(DecodeConfig d) const {
    if (max_len) d.max_len = *max_len;
    if (length_cap_ratio) d.length_cap_ratio = *length_cap_ratio;
    return d;
  }
};

// -- gen-data ---------------------------------------------------------------

struct GenDataOpts {
  std::optional<std::string> config;
  std::string out;
  std::uint64_t seed = 1;
};

void gen_data(const GenDataOpts& o, std::ostream& out) {
  const ToyTaskConfig cfg = o.config ? ToyTaskConfig::from_config(KeyValueConfig::load(*o.config)) : ToyTaskConfig{};
  const ToyCorpus data = generate_toy_corpus(cfg, o.seed);
  const fs::path dir = o.out;
  fs::create_directories(dir);
  const Vocabs v{data.src_vocab, data.tgt_vocab};
  data.src_vocab.save(dir / "vocab.src");
  data.tgt_vocab.save(dir / "vocab.tgt");
  save_corpus(dir / "train", data.train, v);
  save_corpus(dir / "dev", data.dev, v);
  save_corpus(dir / "test", data.test, v);
  write_text(dir / "toy.cfg", cfg.to_config().to_string());
  out << "wrote " << data.train.size() << "/" << data.dev.size() << "/" << data.test.size()
      << " train/dev/test pairs to " << dir.string() << " (" << data.noised_tokens << " of " << data.target_tokens
      << " training target tokens noised)\n";
}

// -- train --------------------------------------------------------------------

struct TrainOpts {
  std::string train, dev, save;
  std::optional<std::string> vocab_dir, model_config, train_config, teacher, init;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<double> lr, init_range, alpha, tau;
};

void train_cmd(const TrainOpts& o, std::ostream& out) {
  const Vocabs v = load_vocabs(o.vocab_dir ? fs::path(*o.vocab_dir) : dir_of(o.train));
  const ParallelCorpus train_set = load_corpus(o.train, v);
  const ParallelCorpus dev_set = load_corpus(o.dev, v);
  TrainConfig tc;
  tc.apply(load_or_empty(o.train_config));
  if (o.seed) tc.seed = *o.seed;
  if (o.epochs) tc.epochs = *o.epochs;
  if (o.lr) tc.learning_rate = *o.lr;
  if (o.init_range) tc.init_range = *o.init_range;
  tc.validate();

  Seq2SeqModel model;
  if (o.init) {
    model = load_model(*o.init, v);
  } else {
    const ModelConfig mc = ModelConfig::from_config(load_or_empty(o.model_config), v.src.size(), v.tgt.size());
    model = init_params(mc, tc.seed, tc.init_range);
  }
  std::optional<Seq2SeqModel> teacher;
  LossFn loss = nll_objective();
  if (o.teacher) {
    teacher = load_model(*o.teacher, v);
    loss = word_kd_objective(*teacher, o.alpha.value_or(0.5), o.tau.value_or(1.0));
  } else if (o.alpha || o.tau) {
    throw std::invalid_argument("--alpha/--tau need --teacher");
  }
  TrainHooks hooks;
  hooks.on_epoch = [&out](const EpochLog& e) {
    char line[160];
    std::snprintf(line, sizeof line, "epoch %d\tlr %.6g\ttrain_loss %.6f\tdev_ppl %.6f%s\n", e.epoch, e.learning_rate,
                  e.train_loss, e.dev_ppl, e.improved ? "\tbest" : "");
    out << line << std::flush;
  };
  const TrainResult r = train(std::move(model), train_set, dev_set, loss, tc, hooks);
  save_checkpoint(o.save, r.model, meta_of(v));
  char line[160];
  std::snprintf(line, sizeof line, "saved %s (best epoch %d, dev ppl %.6f, %zu parameters)\n", o.save.c_str(),
                r.best_epoch, r.best_dev_ppl, r.model.parameter_count());
  out << line;
}

// -- distill-data -------------------------------------------------------------

struct DistillOpts {
  std::string mode, teacher, input, out;
  std::optional<std::string> vocab_dir;
  std::optional<std::size_t> beam;
  double fraction = 1.0;
  std::size_t samples = 5;
  std::uint64_t seed = 1;
  DecodeFlags decode;
};

void distill_cmd(const DistillOpts& o, std::ostream& out) {
  const Vocabs v = load_vocabs(o.vocab_dir ? fs::path(*o.vocab_dir) : dir_of(o.input));
  const Seq2SeqModel teacher = load_model(o.teacher, v);
  const ParallelCorpus input = load_corpus(o.input, v);
  const DecodeConfig d = o.decode.apply({});
  GeneratedCorpus g;
  if (o.mode == "seq-kd")
    g = generate_seq_kd_corpus(teacher, input, o.beam.value_or(5), d);
  else if (o.mode == "seq-inter")
    g = generate_seq_inter_corpus(teacher, input, o.beam.value_or(35), o.fraction, d);
  else if (o.mode == "kbest")
    g = generate_kbest_corpus(teacher, input, o.beam.value_or(5), d);
  else
    g = generate_sampled_corpus(teacher, input, o.samples, o.seed, d);
  save_corpus(o.out, g.corpus, v);
  out << "wrote " << g.corpus.size() << " pairs to " << o.out << " (" << g.fallbacks
      << " without a finished hypothesis)\n";
}

// -- translate ------------------------------------------------------------------

struct TranslateOpts {
  std::string model, input, output;
  std::optional<std::string> vocab_dir;
  std::size_t beam = 5;
  DecodeFlags decode;
};

void translate_cmd(const TranslateOpts& o, std::ostream& out) {
  const Vocabs v = load_vocabs(o.vocab_dir ? fs::path(*o.vocab_dir) : dir_of(o.input));
  const Seq2SeqModel model = load_model(o.model, v);
  const auto sources = read_sentences(o.input, v.src);
  DecodeConfig d = o.decode.apply({});
  d.beam = o.beam;
  const Seq2SeqScorer scorer(model);
  std::vector<std::vector<std::string>> lines;
  for (const auto& h : translate_all(scorer, sources, d)) {
    const Sentence s = h.output();
    lines.push_back(v.tgt.decode(s));
  }
  write_token_lines(o.output, lines);
  out << "translated " << lines.size() << " sentences with beam " << o.beam << "\n";
}

// -- evaluate -------------------------------------------------------------------

struct EvaluateOpts {
  std::string mode;
  std::optional<std::string> hyp, ref, model, data, input, vocab_dir;
  DecodeFlags decode;
};

void evaluate_cmd(const EvaluateOpts& o, std::ostream& out) {
  if (o.mode == "bleu") {
    if (!o.hyp || !o.ref) throw CLI::ValidationError("evaluate --mode bleu needs --hyp and --ref");
    const auto hyp_lines = read_token_lines(*o.hyp, true);
    const auto ref_lines = read_token_lines(*o.ref);
    if (hyp_lines.size() != ref_lines.size())
      throw std::runtime_error("hypothesis and reference line counts differ (" + std::to_string(hyp_lines.size()) +
                               " vs " + std::to_string(ref_lines.size()) + ")");
    // BLEU only compares tokens, so a local interning table is enough.
    std::map<std::string, TokenId> ids;
    auto intern = [&](const std::vector<std::string>& toks) {
      Sentence s;
      for (const auto& t : toks) s.push_back(ids.emplace(t, static_cast<TokenId>(ids.size())).first->second);
      return s;
    };
    std::vector<Sentence> hyps, refs;
    for (const auto& l : hyp_lines) hyps.push_back(intern(l));
    for (const auto& l : ref_lines) refs.push_back(intern(l));
    out << corpus_bleu(hyps, refs).format() << "\n";
    return;
  }
  if (!o.model) throw CLI::ValidationError("evaluate --mode " + o.mode + " needs --model");
  if (o.mode == "ppl") {
    if (!o.data) throw CLI::ValidationError("evaluate --mode ppl needs --data");
    const Vocabs v = load_vocabs(o.vocab_dir ? fs::path(*o.vocab_dir) : dir_of(*o.data));
    const Seq2SeqModel model = load_model(*o.model, v);
    char line[64];
    std::snprintf(line, sizeof line, "PPL = %.4f\n", perplexity(model, load_corpus(*o.data, v)));
    out << line;
    return;
  }
  if (!o.input) throw CLI::ValidationError("evaluate --mode mode-mass needs --input");
  const Vocabs v = load_vocabs(o.vocab_dir ? fs::path(*o.vocab_dir) : dir_of(*o.input));
  const Seq2SeqModel model = load_model(*o.model, v);
  DecodeConfig d = o.decode.apply({});
  d.beam = 1;
  char line[64];
  std::snprintf(line, sizeof line, "p(t=y^) = %.6f\n", mode_mass(Seq2SeqScorer(model), read_sentences(*o.input, v.src), d));
  out << line;
}

// -- prune ----------------------------------------------------------------------

struct PruneOpts {
  std::string model, save;
  double fraction = 0.8;
  std::optional<std::string> seq_kd, seq_inter, seq_kd_dev, seq_inter_dev, vocab_dir, teacher, train_config, report;
  std::optional<std::size_t> teacher_params;
  double lr1 = 0.2, lr2 = 0.1;
  int epochs = 5;
  std::optional<std::uint64_t> seed;
  bool no_retrain = false;
};

void prune_cmd(const PruneOpts& o, std::ostream& out) {
  if (!o.no_retrain && (!o.seq_kd || !o.seq_inter))
    throw CLI::ValidationError("prune needs --seq-kd-corpus and --seq-inter-corpus unless --no-retrain");
  const fs::path vdir = o.vocab_dir ? fs::path(*o.vocab_dir) : o.seq_kd ? dir_of(*o.seq_kd) : dir_of(o.model);
  const Vocabs v = load_vocabs(vdir);
  const Seq2SeqModel model = load_model(o.model, v);
  const PruneMask mask = compute_prune_mask(model.params, o.fraction);
  Seq2SeqModel pruned = model.clone();
  apply_mask(pruned.params, mask);
  if (!o.no_retrain) {
    TrainConfig tc;
    tc.apply(load_or_empty(o.train_config));
    if (o.seed) tc.seed = *o.seed;
    const ParallelCorpus kd = load_corpus(*o.seq_kd, v);
    const ParallelCorpus inter = load_corpus(*o.seq_inter, v);
    const ParallelCorpus kd_dev = o.seq_kd_dev ? load_corpus(*o.seq_kd_dev, v) : kd;
    const ParallelCorpus inter_dev = o.seq_inter_dev ? load_corpus(*o.seq_inter_dev, v) : inter;
    RetrainConfig rc;
    rc.lr_seq_kd = o.lr1;
    rc.lr_seq_inter = o.lr2;
    rc.max_epochs = o.epochs;
    pruned = retrain_pruned(pruned, mask, kd, kd_dev, inter, inter_dev, nll_objective(), rc, tc).model;
  }
  save_checkpoint(o.save, pruned, meta_of(v));
  std::size_t teacher_count = model.parameter_count();
  if (o.teacher_params)
    teacher_count = *o.teacher_params;
  else if (o.teacher)
    teacher_count = load_model(*o.teacher, v).parameter_count();
  const CompressionReport rep = compression_report(model.parameter_count(), mask.retained_count(), teacher_count);
  out << rep.render();
  if (o.report) write_text(*o.report, rep.to_tsv());
}

// -- bench ----------------------------------------------------------------------

struct BenchOpts {
  std::string model, input;
  std::optional<std::string> vocab_dir, report;
  std::vector<std::size_t> beams{1, 5};
  std::size_t reps = 3;
  DecodeFlags decode;
};

void bench_cmd(const BenchOpts& o, std::ostream& out) {
  const Vocabs v = load_vocabs(o.vocab_dir ? fs::path(*o.vocab_dir) : dir_of(o.input));
  const Seq2SeqModel model = load_model(o.model, v);
  const auto sources = read_sentences(o.input, v.src);
  std::vector<BenchResult> results;
  std::string tsv;
  for (std::size_t k : o.beams) {
    results.push_back(throughput_benchmark(model, sources, k, o.reps, o.decode.apply({})));
    tsv += results.back().to_tsv();
  }
  out << render_bench_table(results);
  if (o.report) write_text(*o.report, tsv);
}

// -- experiment -----------------------------------------------------------------

struct ExperimentOpts {
  std::optional<std::string> grid, recipe, data, teacher, student_config, train_config, out;
  std::optional<std::uint64_t> seed;
};

void experiment_cmd(const ExperimentOpts& o, std::ostream& out) {
  if (o.grid.has_value() == o.recipe.has_value()) throw CLI::ValidationError("experiment needs exactly one of --grid, --recipe");
  if (o.grid) {
    ExperimentConfig cfg = ExperimentConfig::from_config(KeyValueConfig::load(*o.grid));
    if (o.seed) cfg.seed = cfg.data_seed = *o.seed;
    if (o.teacher) cfg.teacher_checkpoint = *o.teacher;
    std::optional<fs::path> dir;
    if (o.out) dir = fs::path(*o.out);
    const ExperimentResult r = run_experiment(cfg, dir);
    const std::string table = render_table(r.rows);
    out << table;
    if (dir) {
      write_text(*dir / "report.tsv", grid_tsv(r.rows));
      write_text(*dir / "report.txt", table);
    }
    return;
  }
  if (!o.data || !o.teacher) throw CLI::ValidationError("experiment --recipe needs --data and --teacher");
  const DistillRecipe recipe = DistillRecipe::from_config(KeyValueConfig::load(*o.recipe));
  const fs::path data = *o.data;
  const Vocabs v = load_vocabs(data);
  TrainConfig tc;
  tc.apply(load_or_empty(o.train_config));
  if (o.seed) tc.seed = *o.seed;
  const ModelConfig mc = ModelConfig::from_config(load_or_empty(o.student_config), v.src.size(), v.tgt.size());
  DistillationContext ctx(load_model(*o.teacher, v), load_corpus(data / "train", v), load_corpus(data / "dev", v),
                          load_corpus(data / "test", v), DecodeConfig{1, 50, 2.0}, tc.seed);
  const RecipeResult r = run_recipe(recipe, ctx, mc, tc);
  const std::string table = render_table({r.report});
  out << table;
  if (o.out) {
    const fs::path dir = *o.out;
    write_text(dir / "report.tsv", r.report.to_tsv());
    write_text(dir / "report.txt", table);
    save_checkpoint(dir / "student.ckpt", r.student, meta_of(v));
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sequence-level knowledge distillation toolkit", "kdseq"};
  app.require_subcommand(1);
  app.fallthrough(false);

  std::function<void()> action;

  GenDataOpts gd;
  auto* s_gen = app.add_subcommand("gen-data", "Generate the synthetic translation task");
  s_gen->add_option("--config", gd.config, "Toy task config file");
  s_gen->add_option("--out", gd.out, "Output directory")->required();
  s_gen->add_option("--seed", gd.seed, "Random seed");
  s_gen->callback([&] { action = [&] { gen_data(gd, out); }; });

  TrainOpts tr;
  auto* s_train = app.add_subcommand("train", "Train a model (Word-KD when --teacher is given)");
  s_train->add_option("--train", tr.train, "Training corpus prefix")->required();
  s_train->add_option("--dev", tr.dev, "Dev corpus prefix")->required();
  s_train->add_option("--save", tr.save, "Checkpoint to write")->required();
  s_train->add_option("--vocab-dir", tr.vocab_dir, "Directory with vocab.src/vocab.tgt (default: next to --train)");
  s_train->add_option("--model-config", tr.model_config, "Model config file");
  s_train->add_option("--train-config", tr.train_config, "Training config file (flags override it)");
  s_train->add_option("--teacher", tr.teacher, "Teacher checkpoint for word-level distillation");
  s_train->add_option("--alpha", tr.alpha, "Word-KD mixing weight (default 0.5)");
  s_train->add_option("--tau", tr.tau, "Word-KD temperature (default 1)");
  s_train->add_option("--init", tr.init, "Start from this checkpoint");
  s_train->add_option("--seed", tr.seed, "Random seed");
  s_train->add_option("--epochs", tr.epochs, "Epochs");
  s_train->add_option("--lr", tr.lr, "Learning rate");
  s_train->add_option("--init-range", tr.init_range, "Uniform init range");
  s_train->callback([&] { action = [&] { train_cmd(tr, out); }; });

  DistillOpts di;
  auto* s_dist = app.add_subcommand("distill-data", "Generate teacher-labelled training data");
  s_dist->add_option("--mode", di.mode, "seq-kd, seq-inter, kbest or sample")
      ->required()
      ->check(CLI::IsMember({"seq-kd", "seq-inter", "kbest", "sample"}));
  s_dist->add_option("--teacher", di.teacher, "Teacher checkpoint")->required();
  s_dist->add_option("--input", di.input, "Corpus prefix")->required();
  s_dist->add_option("--out", di.out, "Output corpus prefix")->required();
  s_dist->add_option("--vocab-dir", di.vocab_dir, "Directory with vocab.src/vocab.tgt");
  s_dist->add_option("--beam", di.beam, "Beam size (default 5; 35 for seq-inter)");
  s_dist->add_option("--fraction", di.fraction, "Seq-Inter: leading fraction of the corpus")
      ->check(CLI::Range(0.0, 1.0));
  s_dist->add_option("--samples", di.samples, "Samples per source for --mode sample");
  s_dist->add_option("--seed", di.seed, "Random seed (sampling)");
  di.decode.add(s_dist);
  s_dist->callback([&] { action = [&] { distill_cmd(di, out); }; });

  TranslateOpts tl;
  auto* s_tl = app.add_subcommand("translate", "Translate a source file");
  s_tl->add_option("--model", tl.model, "Checkpoint")->required();
  s_tl->add_option("--input", tl.input, "Source sentences")->required();
  s_tl->add_option("--output", tl.output, "Output file")->required();
  s_tl->add_option("--beam", tl.beam, "Beam size (1 = greedy)")->check(CLI::PositiveNumber);
  s_tl->add_option("--vocab-dir", tl.vocab_dir, "Directory with vocab.src/vocab.tgt");
  tl.decode.add(s_tl);
  s_tl->callback([&] { action = [&] { translate_cmd(tl, out); }; });

  EvaluateOpts ev;
  auto* s_ev = app.add_subcommand("evaluate", "Corpus BLEU, perplexity or mode mass");
  s_ev->add_option("--mode", ev.mode, "bleu, ppl or mode-mass")
      ->required()
      ->check(CLI::IsMember({"bleu", "ppl", "mode-mass"}));
  s_ev->add_option("--hyp", ev.hyp, "Hypothesis file (bleu)");
  s_ev->add_option("--ref", ev.ref, "Reference file (bleu)");
  s_ev->add_option("--model", ev.model, "Checkpoint (ppl, mode-mass)");
  s_ev->add_option("--data", ev.data, "Corpus prefix (ppl)");
  s_ev->add_option("--input", ev.input, "Source sentences (mode-mass)");
  s_ev->add_option("--vocab-dir", ev.vocab_dir, "Directory with vocab.src/vocab.tgt");
  ev.decode.add(s_ev);
  s_ev->callback([&] { action = [&] { evaluate_cmd(ev, out); }; });

  PruneOpts pr;
  auto* s_pr = app.add_subcommand("prune", "Magnitude pruning with masked retraining");
  s_pr->add_option("--model", pr.model, "Checkpoint to prune")->required();
  s_pr->add_option("--save", pr.save, "Pruned checkpoint to write")->required();
  s_pr->add_option("--fraction", pr.fraction, "Fraction of weights to remove")->check(CLI::Range(0.0, 0.999999));
  s_pr->add_option("--seq-kd-corpus", pr.seq_kd, "Seq-KD corpus prefix (first retraining phase)");
  s_pr->add_option("--seq-inter-corpus", pr.seq_inter, "Seq-Inter corpus prefix (second phase)");
  s_pr->add_option("--seq-kd-dev", pr.seq_kd_dev, "Dev prefix for the first phase");
  s_pr->add_option("--seq-inter-dev", pr.seq_inter_dev, "Dev prefix for the second phase");
  s_pr->add_option("--lr1", pr.lr1, "First phase learning rate");
  s_pr->add_option("--lr2", pr.lr2, "Second phase learning rate");
  s_pr->add_option("--epochs", pr.epochs, "Maximum epochs per phase");
  s_pr->add_option("--teacher", pr.teacher, "Teacher checkpoint for the compression ratio");
  s_pr->add_option("--teacher-params", pr.teacher_params, "Teacher parameter count for the compression ratio");
  s_pr->add_option("--train-config", pr.train_config, "Training config file");
  s_pr->add_option("--vocab-dir", pr.vocab_dir, "Directory with vocab.src/vocab.tgt");
  s_pr->add_option("--report", pr.report, "Write the compression report as TSV");
  s_pr->add_option("--seed", pr.seed, "Random seed");
  s_pr->add_flag("--no-retrain", pr.no_retrain, "Only prune");
  s_pr->callback([&] { action = [&] { prune_cmd(pr, out); }; });

  BenchOpts be;
  auto* s_be = app.add_subcommand("bench", "Decode throughput in source words per second (host CPU, batch 1)");
  s_be->add_option("--model", be.model, "Checkpoint")->required();
  s_be->add_option("--input", be.input, "Source sentences")->required();
  s_be->add_option("--beam", be.beams, "Beam sizes")->check(CLI::PositiveNumber);
  s_be->add_option("--reps", be.reps, "Timed passes after one warmup")->check(CLI::PositiveNumber);
  s_be->add_option("--vocab-dir", be.vocab_dir, "Directory with vocab.src/vocab.tgt");
  s_be->add_option("--report", be.report, "Write results as TSV");
  be.decode.add(s_be);
  s_be->callback([&] { action = [&] { bench_cmd(be, out); }; });

  ExperimentOpts ex;
  auto* s_ex = app.add_subcommand("experiment", "Run a recipe or the recipe grid");
  s_ex->add_option("--grid", ex.grid, "Grid config file");
  s_ex->add_option("--recipe", ex.recipe, "Recipe file");
  s_ex->add_option("--data", ex.data, "Data directory from gen-data (--recipe)");
  s_ex->add_option("--teacher", ex.teacher, "Teacher checkpoint");
  s_ex->add_option("--student-config", ex.student_config, "Student model config (--recipe)");
  s_ex->add_option("--train-config", ex.train_config, "Training config (--recipe)");
  s_ex->add_option("--out", ex.out, "Output directory for reports and checkpoints");
  s_ex->add_option("--seed", ex.seed, "Random seed");
  s_ex->callback([&] { action = [&] { experiment_cmd(ex, out); }; });

  if (args.empty()) {
    err << app.help();
    return 1;
  }
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    err << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return 1;
  }
  try {
    action();
  } catch (const CLI::ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace kdseq
