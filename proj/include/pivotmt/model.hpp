#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "pivotmt/keyvalue.hpp"
#include "pivotmt/rng.hpp"
#include "pivotmt/subword.hpp"
#include "pivotmt/tensor.hpp"

namespace pivotmt {

/// Transformer encoder-decoder hyperparameters. The defaults are the
/// desk-scale configuration.
struct ModelConfig {
  std::size_t num_layers = 2;
  std::size_t d_model = 64;
  std::size_t num_heads = 4;
  std::size_t d_ff = 128;
  std::size_t max_seq_len = 64;
  double dropout_rate = 0.0;
  std::size_t src_vocab_size = 0;
  std::size_t tgt_vocab_size = 0;

  /// Throws ConfigError when the configuration is unusable.
  void validate() const;

  KeyValues to_keyvalues() const;
  static ModelConfig from_keyvalues(const KeyValues& kv);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ParameterSpec {
  std::string name;
  Shape shape;
};

/// Every parameter of the model, in initialization order:
///
///     encoder.embed                      [src_vocab, d_model]
///     encoder.layer{i}.self_attn.W{q,k,v,o} [d_model, d_model], b{q,k,v,o} [d_model]
///     encoder.layer{i}.norm1.{gamma,beta}   [d_model]
///     encoder.layer{i}.ffn.W1 [d_model, d_ff], b1 [d_ff], W2 [d_ff, d_model], b2 [d_model]
///     encoder.layer{i}.norm2.{gamma,beta}
///     decoder.embed                      [tgt_vocab, d_model]
///     decoder.layer{i}.self_attn.*, norm1, cross_attn.*, norm2, ffn.*, norm3
///     output.W [d_model, tgt_vocab], output.b [tgt_vocab]
///
/// Positional encodings are fixed sinusoids and have no parameters.
std::vector<ParameterSpec> parameter_inventory(const ModelConfig& config);

/// Xavier-uniform projections, uniform(±1/sqrt(d_model)) embeddings, zero
/// biases and unit layer-norm gains, drawn in inventory order from `seed`.
Parameters init_parameters(const ModelConfig& config, std::uint64_t seed);

/// Throws ShapeError unless `params` holds exactly the inventory for `config`.
void check_parameters(const Parameters& params, const ModelConfig& config);

/// One source/target training pair; both sides are framed with BOS ... EOS.
struct Example {
  IdSequence src;
  IdSequence tgt;
};

/// Padded [batch x time] id matrices in row-major order. The decoder reads
/// `tgt_in` (target without its final EOS) and predicts `tgt_out` (target
/// without its leading BOS). Masks hold 1 for real tokens and 0 for padding.
struct Batch {
  std::size_t batch_size = 0;
  std::size_t src_len = 0;
  std::size_t tgt_len = 0;
  std::vector<TokenId> src_ids;
  std::vector<TokenId> tgt_in_ids;
  std::vector<TokenId> tgt_out_ids;
  std::vector<std::uint8_t> src_mask;
  std::vector<std::uint8_t> tgt_mask;

  static Batch from_examples(const std::vector<Example>& examples);

  std::size_t target_tokens() const;
};

/// Logits [batch, tgt_len, tgt_vocab]. `dropout_rng` is only consulted in
/// train mode with a non-zero dropout rate.
Tensor forward(const Batch& batch, const Parameters& params, const ModelConfig& config,
               bool train_mode = false, Rng* dropout_rng = nullptr);

/// Mean negative log-likelihood of `tgt_out_ids` over unmasked positions.
double loss(const Tensor& logits, const std::vector<TokenId>& tgt_out_ids,
            const std::vector<std::uint8_t>& tgt_mask);

struct Gradients {
  double loss = 0.0;
  std::size_t tokens = 0;
  Parameters grads;
};

/// Exact reverse-mode gradients of `loss_scale * loss` with respect to every
/// parameter.
Gradients backward(const Batch& batch, const Parameters& params, const ModelConfig& config,
                   double loss_scale = 1.0, bool train_mode = false, Rng* dropout_rng = nullptr);

/// Encoder output for one framed source sentence, reused across decoding
/// steps.
struct EncodedSource {
  Matrix states;
  std::vector<std::uint8_t> mask;
};

EncodedSource encode_source(const IdSequence& src, const Parameters& params,
                            const ModelConfig& config);

/// Log-probabilities of the next target token after `prefix` (which starts
/// with BOS).
std::vector<double> next_token_log_probs(const EncodedSource& source,
                                         const std::vector<TokenId>& prefix,
                                         const Parameters& params, const ModelConfig& config);

}  // namespace pivotmt
