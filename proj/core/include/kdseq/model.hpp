#pragma once

// Stacked-LSTM encoder-decoder with global attention using the bilinear
// ("general") score h_t^T W_a h_s and input feeding: the attentional state
// tanh(W_c [c_t; h_t]) of step t is fed into the first decoder layer at t+1
// and projected onto the target vocabulary.
//
// Row-vector convention throughout: a layer computes x * W, so weight
// matrices are stored [input x output].

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "kdseq/batch.hpp"
#include "kdseq/kv_config.hpp"
#include "kdseq/tensor.hpp"

namespace kdseq {

class Rng;

struct ModelConfig {
  std::size_t layers = 2;
  std::size_t hidden = 64;
  std::size_t embed_dim = 64;
  std::size_t src_vocab_size = 0;
  std::size_t tgt_vocab_size = 0;
  double dropout_rate = 0.3;

  void validate() const;
  /// Reads `layers`, `hidden`, `embed_dim`, `dropout_rate`; vocabulary
  /// sizes come from the vocabularies, not the file.
  static ModelConfig from_config(const KeyValueConfig& cfg, std::size_t src_vocab_size, std::size_t tgt_vocab_size);
  bool operator==(const ModelConfig&) const = default;
};

/// Name -> tensor table. Names and shapes are fixed by the ModelConfig:
///
///   src_embed [Vs x E], tgt_embed [Vt x E]
///   enc.<l>.W_x [in x 4H], enc.<l>.W_h [H x 4H], enc.<l>.b [1 x 4H]
///   dec.<l>.W_x [in x 4H], dec.<l>.W_h [H x 4H], dec.<l>.b [1 x 4H]
///   dec.0.W_feed [H x 4H]                     (input feeding)
///   attn.W_a [H x H], attn.W_c [2H x H]
///   out.W_o [H x Vt], out.b [1 x Vt]
///
/// with in = E for layer 0 and H above it. Gate blocks are ordered
/// input, forget, output, candidate.
class ModelParams {
 public:
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  void insert(const std::string& name, Tensor t) { tensors_[name] = std::move(t); }

  std::vector<std::string> names() const;
  std::size_t count() const;
  std::size_t num_tensors() const { return tensors_.size(); }

  /// Deep copy: shares no storage with this table.
  ModelParams clone() const;
  void zero_grad();
  void set_requires_grad(bool on);

  auto begin() { return tensors_.begin(); }
  auto end() { return tensors_.end(); }
  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }

 private:
  std::map<std::string, Tensor> tensors_;
};

std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& cfg);

struct Seq2SeqModel {
  ModelConfig config;
  ModelParams params;

  Seq2SeqModel clone() const { return {config, params.clone()}; }
  std::size_t parameter_count() const { return params.count(); }
};

/// Uniform weights in [-init_range, init_range], zero biases except the
/// LSTM forget gate bias of 1. Deterministic in `seed`.
Seq2SeqModel init_params(const ModelConfig& cfg, std::uint64_t seed, double init_range = 0.1);

struct ForwardOptions {
  bool training = false;  // enables dropout between stacked layers
  Rng* dropout_rng = nullptr;
};

struct LayerState {
  Tensor h;  // [B x H]
  Tensor c;  // [B x H]
};

struct EncodedSource {
  std::size_t batch = 0;
  std::size_t src_len = 0;
  std::vector<std::size_t> src_lengths;
  Tensor annotations;     // [B x I x H], top-layer states
  Tensor attention_mask;  // [B x I], 0 on tokens and a large negative value on padding
  std::vector<LayerState> final_states;
};

struct DecoderState {
  std::vector<LayerState> layers;
  Tensor input_feed;  // [B x H], zeros before the first step
  std::shared_ptr<const EncodedSource> source;
};

/// `src` is batch-major [batch x src_len] padded with <pad>.
EncodedSource encode(const Seq2SeqModel& model, std::span<const TokenId> src, std::size_t batch,
                     std::span<const std::size_t> src_lengths, const ForwardOptions& opts = {});
EncodedSource encode(const Seq2SeqModel& model, const Batch& batch, const ForwardOptions& opts = {});

DecoderState initial_decoder_state(const Seq2SeqModel& model, std::shared_ptr<const EncodedSource> source);

struct StepOutput {
  Tensor log_dist;   // [B x Vt]
  Tensor attention;  // [B x I]
  DecoderState state;
};

/// One decoder step consuming `prev_tokens` (one per batch row).
StepOutput decode_step(const Seq2SeqModel& model, const DecoderState& state, std::span<const TokenId> prev_tokens,
                       const ForwardOptions& opts = {});

struct ForcedOutput {
  Tensor logits;  // [(J*B) x Vt], row j*B + b is step j of sentence b
  std::vector<Tensor> attention;  // per step, [B x I]
  std::size_t steps = 0;
  std::size_t batch = 0;
};

/// Teacher-forced pass over `batch.tgt_in`.
ForcedOutput forward_teacher_forced(const Seq2SeqModel& model, const Batch& batch, const ForwardOptions& opts = {});

}  // namespace kdseq
