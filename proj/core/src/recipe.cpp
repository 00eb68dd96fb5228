#include "kdseq/recipe.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "kdseq/bleu.hpp"
#include "kdseq/checkpoint.hpp"
#include "kdseq/seq2seq_scorer.hpp"

namespace kdseq {

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string variant_name(SeqKdVariant v) {
  switch (v) {
    case SeqKdVariant::Mode:
      return "mode";
    case SeqKdVariant::KBest:
      return "kbest";
    case SeqKdVariant::Sample:
      return "sample";
  }
  return "mode";
}

std::string bool_name(bool b) { return b ? "true" : "false"; }

}  // namespace

void DistillRecipe::validate(bool allow_baseline) const {
  if (!allow_baseline && !any_regime()) throw ConfigError("recipe: enable at least one of word_kd, seq_kd, seq_inter");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("recipe: alpha must lie in [0, 1]");
  if (!(tau >= 1.0)) throw ConfigError("recipe: tau must be >= 1");
  if (seq_kd_beam < 1 || seq_inter_beam < 1) throw ConfigError("recipe: beam sizes must be >= 1");
  if (!(fine_tune_lr >= 0.0)) throw ConfigError("recipe: fine_tune_lr must be >= 0");
  if (!(seq_inter_fraction > 0.0 && seq_inter_fraction <= 1.0))
    throw ConfigError("recipe: seq_inter_fraction must lie in (0, 1]");
  if (seq_kd_samples < 1) throw ConfigError("recipe: seq_kd_samples must be >= 1");
}

void DistillRecipe::apply(const KeyValueConfig& cfg) {
  cfg.require_known({"use_word_kd", "use_seq_kd", "use_seq_inter", "alpha", "tau", "seq_kd_beam", "seq_inter_beam",
                     "fine_tune_lr", "seq_inter_fraction", "seq_kd_variant", "seq_kd_samples"});
  if (auto v = cfg.get_bool("use_word_kd")) use_word_kd = *v;
  if (auto v = cfg.get_bool("use_seq_kd")) use_seq_kd = *v;
  if (auto v = cfg.get_bool("use_seq_inter")) use_seq_inter = *v;
  if (auto v = cfg.get_double("alpha")) alpha = *v;
  if (auto v = cfg.get_double("tau")) tau = *v;
  if (auto v = cfg.get_int("seq_kd_beam")) seq_kd_beam = static_cast<std::size_t>(*v);
  if (auto v = cfg.get_int("seq_inter_beam")) seq_inter_beam = static_cast<std::size_t>(*v);
  if (auto v = cfg.get_double("fine_tune_lr")) fine_tune_lr = *v;
  if (auto v = cfg.get_double("seq_inter_fraction")) seq_inter_fraction = *v;
  if (auto v = cfg.get_string("seq_kd_variant")) {
    if (*v == "mode")
      seq_kd_variant = SeqKdVariant::Mode;
    else if (*v == "kbest")
      seq_kd_variant = SeqKdVariant::KBest;
    else if (*v == "sample")
      seq_kd_variant = SeqKdVariant::Sample;
    else
      throw ConfigError("recipe: seq_kd_variant must be mode, kbest or sample");
  }
  if (auto v = cfg.get_int("seq_kd_samples")) {
    if (*v < 1) throw ConfigError("recipe: seq_kd_samples must be >= 1");
    seq_kd_samples = static_cast<std::size_t>(*v);
  }
}

DistillRecipe DistillRecipe::from_config(const KeyValueConfig& cfg) {
  DistillRecipe r;
  r.apply(cfg);
  r.validate();
  return r;
}

KeyValueConfig DistillRecipe::to_config() const {
  KeyValueConfig c;
  c.set("use_word_kd", bool_name(use_word_kd));
  c.set("use_seq_kd", bool_name(use_seq_kd));
  c.set("use_seq_inter", bool_name(use_seq_inter));
  c.set("alpha", fmt("%.17g", alpha));
  c.set("tau", fmt("%.17g", tau));
  c.set("seq_kd_beam", std::to_string(seq_kd_beam));
  c.set("seq_inter_beam", std::to_string(seq_inter_beam));
  c.set("fine_tune_lr", fmt("%.17g", fine_tune_lr));
  c.set("seq_inter_fraction", fmt("%.17g", seq_inter_fraction));
  c.set("seq_kd_variant", variant_name(seq_kd_variant));
  c.set("seq_kd_samples", std::to_string(seq_kd_samples));
  return c;
}

std::string DistillRecipe::label() const {
  std::string out = use_seq_kd ? "Seq-KD" : use_word_kd ? "Word-KD" : "Baseline";
  if (use_seq_inter) out += " + Seq-Inter";
  if (use_seq_kd && use_word_kd) out += " + Word-KD";
  return out;
}

DistillRecipe DistillRecipe::from_row_name(const std::string& name, const DistillRecipe& defaults) {
  DistillRecipe r = defaults;
  r.use_word_kd = r.use_seq_kd = r.use_seq_inter = false;
  for (const auto& raw : split_list(name, '+')) {
    std::string part = trim(raw);
    for (auto& ch : part) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (part == "baseline")
      continue;
    else if (part == "word-kd")
      r.use_word_kd = true;
    else if (part == "seq-kd")
      r.use_seq_kd = true;
    else if (part == "seq-inter")
      r.use_seq_inter = true;
    else
      throw ConfigError("unknown recipe row component '" + part + "' in '" + name + "'");
  }
  return r;
}

std::vector<std::string> table_row_names() {
  return {"baseline",          "word-kd",          "seq-kd",           "baseline+seq-inter",
          "word-kd+seq-inter", "seq-kd+seq-inter", "seq-kd+word-kd", "seq-kd+seq-inter+word-kd"};
}

DistillationContext::DistillationContext(Seq2SeqModel teacher, ParallelCorpus train, ParallelCorpus dev,
                                         ParallelCorpus test, DecodeConfig decode, std::uint64_t seed)
    : teacher_(std::move(teacher)),
      train_(std::move(train)),
      dev_(std::move(dev)),
      test_(std::move(test)),
      decode_(decode),
      seed_(seed) {
  if (train_.empty() || dev_.empty() || test_.empty()) throw std::invalid_argument("distillation: empty corpus");
}

DistillationContext::Split DistillationContext::seq_kd(const DistillRecipe& r) {
  const std::string key = "seq-kd/" + variant_name(r.seq_kd_variant) + "/" + std::to_string(r.seq_kd_beam) + "/" +
                          std::to_string(r.seq_kd_samples);
  auto it = cache_.find(key);
  if (it == cache_.end()) {
    Cached c;
    auto gen = [&](const ParallelCorpus& corpus, std::uint64_t stream) {
      switch (r.seq_kd_variant) {
        case SeqKdVariant::KBest:
          return generate_kbest_corpus(teacher_, corpus, r.seq_kd_beam, decode_);
        case SeqKdVariant::Sample:
          return generate_sampled_corpus(teacher_, corpus, r.seq_kd_samples, derive_seed(seed_, stream), decode_);
        case SeqKdVariant::Mode:
          break;
      }
      return generate_seq_kd_corpus(teacher_, corpus, r.seq_kd_beam, decode_);
    };
    GeneratedCorpus t = gen(train_, 0x5eed01);
    // Dev targets for checkpoint selection come from the same generator:
    // the student is judged against what it is trained to reproduce.
    GeneratedCorpus d = gen(dev_, 0x5eed02);
    fallbacks_ += t.fallbacks + d.fallbacks;
    c.train = std::move(t.corpus);
    c.dev = std::move(d.corpus);
    it = cache_.emplace(key, std::move(c)).first;
  }
  return {&it->second.train, &it->second.dev};
}

DistillationContext::Split DistillationContext::seq_inter(const DistillRecipe& r) {
  const std::string key =
      "seq-inter/" + std::to_string(r.seq_inter_beam) + "/" + fmt("%.17g", r.seq_inter_fraction);
  auto it = cache_.find(key);
  if (it == cache_.end()) {
    Cached c;
    GeneratedCorpus t = generate_seq_inter_corpus(teacher_, train_, r.seq_inter_beam, r.seq_inter_fraction, decode_);
    GeneratedCorpus d = generate_seq_inter_corpus(teacher_, dev_, r.seq_inter_beam, 1.0, decode_);
    fallbacks_ += t.fallbacks + d.fallbacks;
    c.train = std::move(t.corpus);
    c.dev = std::move(d.corpus);
    it = cache_.emplace(key, std::move(c)).first;
  }
  return {&it->second.train, &it->second.dev};
}

std::string RecipeReport::to_tsv() const {
  std::ostringstream os;
  os << "model\t" << name << '\n';
  os << "bleu_k1\t" << fmt("%.2f", bleu_greedy) << '\n';
  os << "bleu_k5\t" << fmt("%.2f", bleu_beam) << '\n';
  os << "ppl\t" << fmt("%.4f", ppl) << '\n';
  os << "mode_mass\t" << fmt("%.6f", mode_mass) << '\n';
  os << "params\t" << params << '\n';
  return os.str();
}

RecipeReport evaluate_model(const std::string& name, const Seq2SeqModel& model, const ParallelCorpus& test,
                            const DecodeConfig& decode) {
  const Seq2SeqScorer scorer(model);
  const auto sources = sources_of(test);
  const auto refs = targets_of(test);
  auto outputs = [&](std::size_t beam) {
    DecodeConfig d = decode;
    d.beam = beam;
    std::vector<Sentence> hyps;
    for (const auto& h : translate_all(scorer, sources, d)) hyps.push_back(h.output());
    return hyps;
  };
  RecipeReport r;
  r.name = name;
  r.bleu_greedy = corpus_bleu(outputs(1), refs).score;
  r.bleu_beam = corpus_bleu(outputs(5), refs).score;
  r.ppl = perplexity(model, test);
  r.mode_mass = mode_mass(scorer, sources, decode);
  r.params = model.parameter_count();
  return r;
}

RecipeResult run_recipe(const DistillRecipe& recipe, DistillationContext& ctx, const ModelConfig& student_cfg,
                        const TrainConfig& train_cfg) {
  recipe.validate(true);
  const Seq2SeqModel& teacher = ctx.teacher();
  if (student_cfg.src_vocab_size != teacher.config.src_vocab_size ||
      student_cfg.tgt_vocab_size != teacher.config.tgt_vocab_size)
    throw std::invalid_argument("recipe: teacher and student vocabularies differ");

  const LossFn loss = recipe.use_word_kd ? word_kd_objective(teacher, recipe.alpha, recipe.tau) : nll_objective();
  const ParallelCorpus* train_set = &ctx.train();
  const ParallelCorpus* dev_set = &ctx.dev();
  if (recipe.use_seq_kd) {
    const auto split = ctx.seq_kd(recipe);
    train_set = split.train;
    dev_set = split.dev;
  }

  Seq2SeqModel student = init_params(student_cfg, train_cfg.seed, train_cfg.init_range);
  RecipeResult out{Seq2SeqModel{}, {}, train(std::move(student), *train_set, *dev_set, loss, train_cfg), std::nullopt};
  out.student = out.base.model.clone();

  if (recipe.use_seq_inter) {
    const auto split = ctx.seq_inter(recipe);
    FineTuneConfig ft;
    ft.learning_rate = recipe.fine_tune_lr;
    out.fine_tuned = fine_tune(out.student, *split.train, *split.dev, loss, ft, train_cfg);
    out.student = out.fine_tuned->model.clone();
  }
  out.report = evaluate_model(recipe.any_regime() ? recipe.label() : "Baseline", out.student, ctx.test(), ctx.decode());
  return out;
}

std::vector<GridRow> with_deltas(const std::vector<RecipeReport>& rows) {
  std::vector<GridRow> out;
  if (rows.empty()) return out;
  const RecipeReport* ref = &rows.front();
  for (const auto& r : rows)
    if (r.name == "Baseline") {
      ref = &r;
      break;
    }
  for (const auto& r : rows) out.push_back({r, r.bleu_greedy - ref->bleu_greedy, r.bleu_beam - ref->bleu_beam});
  return out;
}

std::string render_table(const std::vector<RecipeReport>& rows) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-28s %9s %8s %9s %8s %10s %9s %9s\n", "Model", "BLEU_K=1", "D_K=1", "BLEU_K=5",
                "D_K=5", "PPL", "p(t=y^)", "Params");
  os << line;
  for (const auto& g : with_deltas(rows)) {
    std::snprintf(line, sizeof line, "%-28s %9.2f %+8.2f %9.2f %+8.2f %10.3f %8.2f%% %9zu\n", g.report.name.c_str(),
                  g.report.bleu_greedy, g.delta_greedy, g.report.bleu_beam, g.delta_beam, g.report.ppl,
                  100.0 * g.report.mode_mass, g.report.params);
    os << line;
  }
  return os.str();
}

std::string grid_tsv(const std::vector<RecipeReport>& rows) {
  std::ostringstream os;
  os << "model\tbleu_k1\tdelta_k1\tbleu_k5\tdelta_k5\tppl\tmode_mass\tparams\n";
  for (const auto& g : with_deltas(rows))
    os << g.report.name << '\t' << fmt("%.2f", g.report.bleu_greedy) << '\t' << fmt("%.2f", g.delta_greedy) << '\t'
       << fmt("%.2f", g.report.bleu_beam) << '\t' << fmt("%.2f", g.delta_beam) << '\t' << fmt("%.4f", g.report.ppl)
       << '\t' << fmt("%.6f", g.report.mode_mass) << '\t' << g.report.params << '\n';
  return os.str();
}

KeyValueConfig config_section(const KeyValueConfig& cfg, const std::string& prefix) {
  KeyValueConfig out;
  const std::string p = prefix + ".";
  for (const auto& [k, v] : cfg.entries())
    if (k.rfind(p, 0) == 0) out.set(k.substr(p.size()), v);
  return out;
}

ExperimentConfig ExperimentConfig::from_config(const KeyValueConfig& cfg) {
  ExperimentConfig e;
  for (const auto& [k, v] : cfg.entries()) {
    const auto dot = k.find('.');
    if (dot == std::string::npos) {
      if (k != "rows" && k != "seed" && k != "data_seed" && k != "teacher_checkpoint")
        throw ConfigError(cfg.source() + ": unknown key '" + k + "'");
      continue;
    }
    const std::string section = k.substr(0, dot);
    if (section != "toy" && section != "teacher" && section != "student" && section != "train" &&
        section != "teacher_train" && section != "recipe" && section != "decode")
      throw ConfigError(cfg.source() + ": unknown section in key '" + k + "'");
  }
  if (auto v = cfg.get_string("rows")) {
    e.rows.clear();
    for (const auto& r : split_list(*v, ',')) e.rows.push_back(trim(r));
  }
  if (auto v = cfg.get_int("seed")) e.seed = static_cast<std::uint64_t>(*v);
  e.data_seed = e.seed;
  if (auto v = cfg.get_int("data_seed")) e.data_seed = static_cast<std::uint64_t>(*v);
  if (auto v = cfg.get_string("teacher_checkpoint")) e.teacher_checkpoint = *v;
  const auto toy = config_section(cfg, "toy");
  if (!toy.entries().empty()) e.toy = ToyTaskConfig::from_config(toy);
  auto model_section = [&](const std::string& name, ModelConfig base) {
    const auto sec = config_section(cfg, name);
    sec.require_known({"layers", "hidden", "embed_dim", "dropout_rate"});
    if (auto v = sec.get_int("layers")) base.layers = static_cast<std::size_t>(*v);
    if (auto v = sec.get_int("hidden")) base.hidden = base.embed_dim = static_cast<std::size_t>(*v);
    if (auto v = sec.get_int("embed_dim")) base.embed_dim = static_cast<std::size_t>(*v);
    if (auto v = sec.get_double("dropout_rate")) base.dropout_rate = *v;
    return base;
  };
  e.teacher = model_section("teacher", e.teacher);
  e.student = model_section("student", e.student);
  e.train.apply(config_section(cfg, "train"));
  const double teacher_init = e.teacher_train.init_range;
  e.teacher_train = e.train;
  e.teacher_train.init_range = teacher_init;
  e.teacher_train.apply(config_section(cfg, "teacher_train"));
  e.recipe.apply(config_section(cfg, "recipe"));
  e.recipe.validate(true);
  const auto dec = config_section(cfg, "decode");
  dec.require_known({"max_len", "length_cap_ratio"});
  if (auto v = dec.get_int("max_len")) e.decode.max_len = static_cast<std::size_t>(*v);
  if (auto v = dec.get_double("length_cap_ratio")) e.decode.length_cap_ratio = *v;
  for (const auto& r : e.rows) DistillRecipe::from_row_name(r, e.recipe);
  return e;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& out_dir) {
  const ToyCorpus data = generate_toy_corpus(cfg.toy, cfg.data_seed);
  const CheckpointMeta meta{data.src_vocab.checksum(), data.tgt_vocab.checksum()};

  Seq2SeqModel teacher;
  if (cfg.teacher_checkpoint) {
    Checkpoint ck = load_checkpoint(*cfg.teacher_checkpoint);
    if (ck.meta.src_vocab_checksum != meta.src_vocab_checksum || ck.meta.tgt_vocab_checksum != meta.tgt_vocab_checksum)
      throw std::invalid_argument("experiment: teacher checkpoint vocabularies do not match the data");
    teacher = std::move(ck.model);
  } else {
    ModelConfig tc = cfg.teacher;
    tc.src_vocab_size = data.src_vocab.size();
    tc.tgt_vocab_size = data.tgt_vocab.size();
    TrainConfig tt = cfg.teacher_train;
    tt.seed = cfg.seed;
    teacher = train(init_params(tc, tt.seed, tt.init_range), data.train, data.dev, nll_objective(), tt).model;
  }
  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    save_checkpoint(*out_dir / "teacher.ckpt", teacher, meta);
  }

  ModelConfig sc = cfg.student;
  sc.src_vocab_size = data.src_vocab.size();
  sc.tgt_vocab_size = data.tgt_vocab.size();
  TrainConfig st = cfg.train;
  st.seed = cfg.seed;

  ExperimentResult result;
  result.context =
      std::make_unique<DistillationContext>(teacher.clone(), data.train, data.dev, data.test, cfg.decode, cfg.seed);
  DistillationContext& ctx = *result.context;
  for (const auto& row : cfg.rows) {
    const DistillRecipe recipe = DistillRecipe::from_row_name(row, cfg.recipe);
    RecipeResult r = run_recipe(recipe, ctx, sc, st);
    if (out_dir) save_checkpoint(*out_dir / (row + ".ckpt"), r.student, meta);
    result.rows.push_back(r.report);
    result.students.push_back(std::move(r.student));
  }
  result.teacher = std::move(teacher);
  return result;
}

}  // namespace kdseq
