#include "kdseq/model.hpp"

#include <algorithm>
#include <stdexcept>

#include "kdseq/ops.hpp"
#include "kdseq/rng.hpp"
#include "kdseq/vocab.hpp"

namespace kdseq {

namespace {

constexpr double kMaskedScore = -1e30;

std::string layer_name(const char* side, std::size_t layer, const char* leaf) {
  return std::string(side) + "." + std::to_string(layer) + "." + leaf;
}

Tensor dropout(const Tensor& x, const ForwardOptions& opts, double rate) {
  if (!opts.training || rate <= 0.0) return x;
  if (!opts.dropout_rng) throw std::invalid_argument("dropout during training needs an rng");
  const double keep = 1.0 - rate;
  std::vector<double> mask(x.size());
  for (auto& m : mask) m = opts.dropout_rng->bernoulli(keep) ? 1.0 / keep : 0.0;
  return mul(x, Tensor::from(x.shape(), std::move(mask)));
}

LayerState lstm_cell(const Tensor& pre, const LayerState& prev, const Tensor& w_h, std::size_t H) {
  Tensor gates = add(pre, matmul(prev.h, w_h));
  Tensor in_gate = sigmoid(slice(gates, 1, 0, H));
  Tensor forget_gate = sigmoid(slice(gates, 1, H, 2 * H));
  Tensor out_gate = sigmoid(slice(gates, 1, 2 * H, 3 * H));
  Tensor candidate = tanh(slice(gates, 1, 3 * H, 4 * H));
  Tensor c = add(mul(forget_gate, prev.c), mul(in_gate, candidate));
  Tensor h = mul(out_gate, tanh(c));
  return {h, c};
}

struct AttentionalStep {
  Tensor attentional;  // h~ [B x H]
  Tensor attention;    // [B x I]
  DecoderState state;
};

// Runs the decoder stack from the layer-0 input pre-activation (embedding
// projection plus bias), adds input feeding, then attends.
AttentionalStep step_core(const Seq2SeqModel& model, const DecoderState& state, const Tensor& embed_pre,
                          const ForwardOptions& opts) {
  const auto& cfg = model.config;
  const auto& P = model.params;
  const std::size_t H = cfg.hidden;
  const EncodedSource& src = *state.source;
  const std::size_t B = embed_pre.dim(0);

  DecoderState next;
  next.source = state.source;
  next.layers.reserve(cfg.layers);

  Tensor below;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    Tensor pre;
    if (l == 0) {
      pre = add(embed_pre, matmul(state.input_feed, P.at("dec.0.W_feed")));
    } else {
      pre = add_row(matmul(dropout(below, opts, cfg.dropout_rate), P.at(layer_name("dec", l, "W_x"))),
                    P.at(layer_name("dec", l, "b")));
    }
    next.layers.push_back(lstm_cell(pre, state.layers[l], P.at(layer_name("dec", l, "W_h")), H));
    below = next.layers.back().h;
  }

  const Tensor& top = below;
  Tensor query = reshape(matmul(top, P.at("attn.W_a")), {B, H, 1});
  Tensor scores = reshape(bmm(src.annotations, query), {B, src.src_len});
  Tensor weights = softmax(add(scores, src.attention_mask), 1);
  Tensor context = reshape(bmm(reshape(weights, {B, 1, src.src_len}), src.annotations), {B, H});
  const Tensor parts[] = {context, top};
  Tensor attentional = tanh(matmul(concat(parts, 1), P.at("attn.W_c")));
  next.input_feed = attentional;
  return {attentional, weights, std::move(next)};
}

}  // namespace

void ModelConfig::validate() const {
  if (layers < 1) throw ConfigError("model: layers must be >= 1");
  if (hidden < 1) throw ConfigError("model: hidden must be >= 1");
  if (embed_dim != hidden) throw ConfigError("model: embed_dim must equal hidden");
  if (src_vocab_size < Vocabulary::kNumSpecials || tgt_vocab_size < Vocabulary::kNumSpecials)
    throw ConfigError("model: vocabularies must hold at least the four specials");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("model: dropout_rate must lie in [0, 1)");
}

ModelConfig ModelConfig::from_config(const KeyValueConfig& kv, std::size_t src_vocab_size,
                                     std::size_t tgt_vocab_size) {
  kv.require_known({"layers", "hidden", "embed_dim", "dropout_rate"});
  ModelConfig c;
  if (auto v = kv.get_int("layers")) c.layers = static_cast<std::size_t>(*v);
  if (auto v = kv.get_int("hidden")) c.hidden = static_cast<std::size_t>(*v);
  c.embed_dim = c.hidden;
  if (auto v = kv.get_int("embed_dim")) c.embed_dim = static_cast<std::size_t>(*v);
  if (auto v = kv.get_double("dropout_rate")) c.dropout_rate = *v;
  c.src_vocab_size = src_vocab_size;
  c.tgt_vocab_size = tgt_vocab_size;
  c.validate();
  return c;
}

Tensor& ModelParams::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("no parameter named " + name);
  return it->second;
}

const Tensor& ModelParams::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("no parameter named " + name);
  return it->second;
}

std::vector<std::string> ModelParams::names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : tensors_) out.push_back(k);
  return out;
}

std::size_t ModelParams::count() const {
  std::size_t n = 0;
  for (const auto& [k, v] : tensors_) n += v.size();
  return n;
}

ModelParams ModelParams::clone() const {
  ModelParams out;
  for (const auto& [k, v] : tensors_) out.tensors_.emplace(k, v.clone());
  return out;
}

void ModelParams::zero_grad() {
  for (auto& [k, v] : tensors_) v.zero_grad();
}

void ModelParams::set_requires_grad(bool on) {
  for (auto& [k, v] : tensors_) v.set_requires_grad(on);
}

std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& cfg) {
  const std::size_t H = cfg.hidden, E = cfg.embed_dim;
  std::vector<std::pair<std::string, Shape>> out;
  out.push_back({"src_embed", {cfg.src_vocab_size, E}});
  out.push_back({"tgt_embed", {cfg.tgt_vocab_size, E}});
  for (const char* side : {"enc", "dec"}) {
    for (std::size_t l = 0; l < cfg.layers; ++l) {
      out.push_back({layer_name(side, l, "W_x"), {l == 0 ? E : H, 4 * H}});
      out.push_back({layer_name(side, l, "W_h"), {H, 4 * H}});
      out.push_back({layer_name(side, l, "b"), {1, 4 * H}});
    }
  }
  out.push_back({"dec.0.W_feed", {H, 4 * H}});
  out.push_back({"attn.W_a", {H, H}});
  out.push_back({"attn.W_c", {2 * H, H}});
  out.push_back({"out.W_o", {H, cfg.tgt_vocab_size}});
  out.push_back({"out.b", {1, cfg.tgt_vocab_size}});
  return out;
}

Seq2SeqModel init_params(const ModelConfig& cfg, std::uint64_t seed, double init_range) {
  cfg.validate();
  auto layout = parameter_layout(cfg);
  std::sort(layout.begin(), layout.end());
  Rng rng(seed);
  Seq2SeqModel model{cfg, {}};
  const std::size_t H = cfg.hidden;
  for (const auto& [name, shape] : layout) {
    Tensor t = Tensor::zeros(shape, true);
    const bool is_bias = name.size() >= 2 && name.compare(name.size() - 2, 2, ".b") == 0;
    auto v = t.mutable_values();
    if (is_bias) {
      if (name != "out.b")
        for (std::size_t i = H; i < 2 * H; ++i) v[i] = 1.0;
    } else {
      for (auto& x : v) x = rng.uniform(-init_range, init_range);
    }
    model.params.insert(name, std::move(t));
  }
  return model;
}

EncodedSource encode(const Seq2SeqModel& model, std::span<const TokenId> src, std::size_t batch,
                     std::span<const std::size_t> src_lengths, const ForwardOptions& opts) {
  const auto& cfg = model.config;
  const auto& P = model.params;
  if (batch == 0 || src.empty() || src.size() % batch != 0)
    throw DimensionError("encode: source matrix does not split into " + std::to_string(batch) + " rows");
  if (src_lengths.size() != batch) throw DimensionError("encode: one length per batch row required");
  const std::size_t I = src.size() / batch, B = batch, H = cfg.hidden;

  std::vector<TokenId> time_major(I * B);
  for (std::size_t b = 0; b < B; ++b) {
    if (src_lengths[b] < 1 || src_lengths[b] > I) throw DimensionError("encode: invalid source length");
    for (std::size_t i = 0; i < I; ++i) {
      const TokenId t = src[b * I + i];
      if (t < 0 || static_cast<std::size_t>(t) >= cfg.src_vocab_size)
        throw std::out_of_range("encode: source id " + std::to_string(t) + " >= vocabulary size " +
                                std::to_string(cfg.src_vocab_size));
      time_major[i * B + b] = t;
    }
  }

  // Rows past their sentence end keep their previous state.
  std::vector<Tensor> keep_new(I), keep_old(I);
  for (std::size_t i = 0; i < I; ++i) {
    bool padded = false;
    std::vector<double> m(B * H, 1.0), inv(B * H, 0.0);
    for (std::size_t b = 0; b < B; ++b)
      if (i >= src_lengths[b]) {
        padded = true;
        std::fill_n(m.begin() + static_cast<std::ptrdiff_t>(b * H), H, 0.0);
        std::fill_n(inv.begin() + static_cast<std::ptrdiff_t>(b * H), H, 1.0);
      }
    if (padded) {
      keep_new[i] = Tensor::from({B, H}, std::move(m));
      keep_old[i] = Tensor::from({B, H}, std::move(inv));
    }
  }

  EncodedSource out;
  out.batch = B;
  out.src_len = I;
  out.src_lengths.assign(src_lengths.begin(), src_lengths.end());

  const Tensor zeros = Tensor::zeros({B, H});
  std::vector<Tensor> outputs(I);
  Tensor layer_input = gather(P.at("src_embed"), time_major);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    if (l > 0) layer_input = dropout(concat(outputs, 0), opts, cfg.dropout_rate);
    Tensor pre = add_row(matmul(layer_input, P.at(layer_name("enc", l, "W_x"))), P.at(layer_name("enc", l, "b")));
    const Tensor& w_h = P.at(layer_name("enc", l, "W_h"));
    LayerState state{zeros, zeros};
    for (std::size_t i = 0; i < I; ++i) {
      Tensor pre_i = I == 1 ? pre : slice(pre, 0, i * B, (i + 1) * B);
      LayerState next = lstm_cell(pre_i, state, w_h, H);
      if (keep_new[i].defined()) {
        next.h = add(mul(keep_new[i], next.h), mul(keep_old[i], state.h));
        next.c = add(mul(keep_new[i], next.c), mul(keep_old[i], state.c));
      }
      state = next;
      outputs[i] = state.h;
    }
    out.final_states.push_back(state);
  }

  std::vector<Tensor> columns;
  columns.reserve(I);
  for (const auto& h : outputs) columns.push_back(reshape(h, {B, 1, H}));
  out.annotations = I == 1 ? columns.front() : concat(columns, 1);

  std::vector<double> mask(B * I, 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t i = src_lengths[b]; i < I; ++i) mask[b * I + i] = kMaskedScore;
  out.attention_mask = Tensor::from({B, I}, std::move(mask));
  return out;
}

EncodedSource encode(const Seq2SeqModel& model, const Batch& batch, const ForwardOptions& opts) {
  return encode(model, batch.src, batch.size, batch.src_lengths, opts);
}

DecoderState initial_decoder_state(const Seq2SeqModel& model, std::shared_ptr<const EncodedSource> source) {
  DecoderState s;
  s.layers = source->final_states;
  s.input_feed = Tensor::zeros({source->batch, model.config.hidden});
  s.source = std::move(source);
  return s;
}

StepOutput decode_step(const Seq2SeqModel& model, const DecoderState& state, std::span<const TokenId> prev_tokens,
                       const ForwardOptions& opts) {
  const auto& P = model.params;
  if (prev_tokens.size() != state.input_feed.dim(0))
    throw DimensionError("decode_step: " + std::to_string(prev_tokens.size()) + " tokens for a state of batch " +
                         std::to_string(state.input_feed.dim(0)));
  Tensor embed_pre = add_row(matmul(gather(P.at("tgt_embed"), prev_tokens), P.at("dec.0.W_x")), P.at("dec.0.b"));
  AttentionalStep step = step_core(model, state, embed_pre, opts);
  Tensor logits = add_row(matmul(step.attentional, P.at("out.W_o")), P.at("out.b"));
  return {log_softmax(logits, 1), step.attention, std::move(step.state)};
}

ForcedOutput forward_teacher_forced(const Seq2SeqModel& model, const Batch& batch, const ForwardOptions& opts) {
  const auto& P = model.params;
  const std::size_t B = batch.size, J = batch.tgt_len;
  for (TokenId t : batch.tgt_in)
    if (t < 0 || static_cast<std::size_t>(t) >= model.config.tgt_vocab_size)
      throw std::out_of_range("target id " + std::to_string(t) + " >= vocabulary size " +
                              std::to_string(model.config.tgt_vocab_size));
  auto source = std::make_shared<const EncodedSource>(encode(model, batch, opts));
  DecoderState state = initial_decoder_state(model, source);

  std::vector<TokenId> time_major(J * B);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t j = 0; j < J; ++j) time_major[j * B + b] = batch.tgt_in_at(b, j);
  Tensor embed_pre = add_row(matmul(gather(P.at("tgt_embed"), time_major), P.at("dec.0.W_x")), P.at("dec.0.b"));

  ForcedOutput out;
  out.steps = J;
  out.batch = B;
  std::vector<Tensor> attentional;
  attentional.reserve(J);
  for (std::size_t j = 0; j < J; ++j) {
    Tensor pre_j = J == 1 ? embed_pre : slice(embed_pre, 0, j * B, (j + 1) * B);
    AttentionalStep step = step_core(model, state, pre_j, opts);
    attentional.push_back(step.attentional);
    out.attention.push_back(step.attention);
    state = std::move(step.state);
  }
  Tensor stacked = J == 1 ? attentional.front() : concat(attentional, 0);
  out.logits = add_row(matmul(stacked, P.at("out.W_o")), P.at("out.b"));
  return out;
}

}  // namespace kdseq
