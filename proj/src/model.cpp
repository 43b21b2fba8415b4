#include "pivotmt/model.hpp"

#include <cmath>
#include <set>

#include <fmt/format.h>

#include "pivotmt/attention.hpp"
#include "pivotmt/error.hpp"

namespace pivotmt {

using detail::AttentionCache;
using detail::AttentionGrads;
using detail::AttentionRefs;

namespace {

constexpr double kLayerNormEps = 1e-6;

const char* const kAttentionTensors[] = {"Wq", "Wk", "Wv", "Wo", "bq", "bk", "bv", "bo"};

std::string layer_name(const char* stack, std::size_t i) { return fmt::format("{}.layer{}", stack, i); }

const Tensor& param(const Parameters& params, const std::string& name) {
  auto it = params.find(name);
  if (it == params.end()) throw ShapeError("missing parameter " + name);
  return it->second;
}

Tensor& param(Parameters& params, const std::string& name) {
  auto it = params.find(name);
  if (it == params.end()) throw ShapeError("missing parameter " + name);
  return it->second;
}

Matrix positional_encoding(std::size_t len, std::size_t d_model) {
  Matrix pe(len, d_model);
  for (std::size_t pos = 0; pos < len; ++pos) {
    for (std::size_t i = 0; i < d_model; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d_model));
      const double angle = static_cast<double>(pos) * freq;
      pe(pos, i) = std::sin(angle);
      if (i + 1 < d_model) pe(pos, i + 1) = std::cos(angle);
    }
  }
  return pe;
}

// Additive masks: 0 where attention is allowed, -inf where it is not.
Matrix key_mask(std::size_t rows, const std::uint8_t* keys, std::size_t n_keys, bool causal) {
  Matrix m = Matrix::Zero(rows, n_keys);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t k = 0; k < n_keys; ++k)
      if (!keys[k] || (causal && k > r)) m(r, k) = kMaskedOut;
  return m;
}

// ---- layer norm -----------------------------------------------------------

struct LayerNormCache {
  Matrix xhat;
  Eigen::VectorXd inv_std;
};

Matrix layer_norm(const Matrix& x, const Tensor& gamma, const Tensor& beta, LayerNormCache& c) {
  const double n = static_cast<double>(x.cols());
  const Eigen::VectorXd mean = x.rowwise().sum() / n;
  const Matrix centered = x.colwise() - mean;
  const Eigen::VectorXd var = centered.array().square().rowwise().sum() / n;
  c.inv_std = (var.array() + kLayerNormEps).rsqrt();
  c.xhat = centered.array().colwise() * c.inv_std.array();
  Matrix y = c.xhat.array().rowwise() * gamma.vector().array();
  y.rowwise() += beta.vector();
  return y;
}

Matrix layer_norm_backward(const Matrix& dy, const LayerNormCache& c, const Tensor& gamma,
                           Tensor& g_gamma, Tensor& g_beta) {
  const double n = static_cast<double>(dy.cols());
  g_gamma.vector() += (dy.array() * c.xhat.array()).colwise().sum().matrix();
  g_beta.vector() += dy.colwise().sum();
  const Matrix dxhat = dy.array().rowwise() * gamma.vector().array();
  const Eigen::VectorXd mean_d = dxhat.rowwise().sum() / n;
  const Eigen::VectorXd mean_dx = (dxhat.array() * c.xhat.array()).rowwise().sum().matrix() / n;
  Matrix dx = (dxhat.colwise() - mean_d) - (c.xhat.array().colwise() * mean_dx.array()).matrix();
  return dx.array().colwise() * c.inv_std.array();
}

// ---- feed-forward ---------------------------------------------------------

struct FfnCache {
  Matrix pre;
  Matrix act;
};

struct FfnRefs {
  const Tensor& w1;
  const Tensor& b1;
  const Tensor& w2;
  const Tensor& b2;
};

struct FfnGrads {
  Tensor& w1;
  Tensor& b1;
  Tensor& w2;
  Tensor& b2;
};

FfnRefs ffn_refs(const Parameters& p, const std::string& prefix) {
  return {param(p, prefix + ".W1"), param(p, prefix + ".b1"), param(p, prefix + ".W2"),
          param(p, prefix + ".b2")};
}

FfnGrads ffn_grads(Parameters& g, const std::string& prefix) {
  return {param(g, prefix + ".W1"), param(g, prefix + ".b1"), param(g, prefix + ".W2"),
          param(g, prefix + ".b2")};
}

Matrix ffn_forward(const Matrix& x, const FfnRefs& p, FfnCache& c) {
  c.pre = x * p.w1.matrix();
  c.pre.rowwise() += p.b1.vector();
  c.act = c.pre.cwiseMax(0.0);
  Matrix out = c.act * p.w2.matrix();
  out.rowwise() += p.b2.vector();
  return out;
}

Matrix ffn_backward(const Matrix& d_out, const Matrix& x, const FfnRefs& p, const FfnCache& c,
                    FfnGrads& g) {
  g.w2.matrix().noalias() += c.act.transpose() * d_out;
  g.b2.vector() += d_out.colwise().sum();
  Matrix d_pre = d_out * p.w2.matrix().transpose();
  d_pre = (c.pre.array() > 0.0).select(d_pre, 0.0);
  g.w1.matrix().noalias() += x.transpose() * d_pre;
  g.b1.vector() += d_pre.colwise().sum();
  return d_pre * p.w1.matrix().transpose();
}

// ---- dropout --------------------------------------------------------------

class Dropout {
 public:
  Dropout(double rate, bool active, Rng* rng) : rate_(rate), active_(active && rate > 0.0 && rng), rng_(rng) {}

  /// Applies a fresh mask to `x` and records it in `mask` (left empty when
  /// inactive).
  void apply(Matrix& x, Matrix& mask) {
    if (!active_) {
      mask.resize(0, 0);
      return;
    }
    mask.resize(x.rows(), x.cols());
    const double keep_scale = 1.0 / (1.0 - rate_);
    for (Eigen::Index i = 0; i < mask.size(); ++i)
      mask.data()[i] = rng_->uniform() < rate_ ? 0.0 : keep_scale;
    x.array() *= mask.array();
  }

  static void backward(Matrix& d, const Matrix& mask) {
    if (mask.size() > 0) d.array() *= mask.array();
  }

 private:
  double rate_;
  bool active_;
  Rng* rng_;
};

// ---- encoder / decoder stacks ---------------------------------------------

struct EncoderLayerTape {
  Matrix input;
  AttentionCache attn;
  Matrix drop_attn;
  LayerNormCache norm1;
  Matrix h1;
  FfnCache ffn;
  Matrix drop_ffn;
  LayerNormCache norm2;
};

struct DecoderLayerTape {
  Matrix input;
  AttentionCache self_attn;
  Matrix drop_self;
  LayerNormCache norm1;
  Matrix h1;
  AttentionCache cross_attn;
  Matrix drop_cross;
  LayerNormCache norm2;
  Matrix h2;
  FfnCache ffn;
  Matrix drop_ffn;
  LayerNormCache norm3;
};

struct Tape {
  Matrix drop_src_embed;
  Matrix drop_tgt_embed;
  std::vector<EncoderLayerTape> encoder;
  std::vector<DecoderLayerTape> decoder;
  Matrix enc_mask;
  Matrix self_mask;
  Matrix cross_mask;
  Matrix enc_out;
  Matrix dec_out;
};

Matrix embed(const TokenId* ids, std::size_t len, const Tensor& table, std::size_t vocab_size,
             const char* side) {
  const std::size_t d = table.dim(1);
  const double scale = std::sqrt(static_cast<double>(d));
  Matrix x = positional_encoding(len, d);
  const auto rows = table.matrix();
  for (std::size_t t = 0; t < len; ++t) {
    const TokenId id = ids[t];
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size)
      throw InputError(fmt::format("{} token id {} outside vocabulary of size {}", side, id,
                                   vocab_size));
    x.row(t) += rows.row(id) * scale;
  }
  return x;
}

void embed_backward(const Matrix& dx, const TokenId* ids, std::size_t len, Tensor& g_table) {
  const double scale = std::sqrt(static_cast<double>(g_table.dim(1)));
  auto rows = g_table.matrix();
  for (std::size_t t = 0; t < len; ++t) rows.row(ids[t]) += dx.row(t) * scale;
}

Matrix encoder_forward(const TokenId* src, const std::uint8_t* src_flags, std::size_t len,
                       const Parameters& params, const ModelConfig& config, Dropout& dropout,
                       Tape& tape) {
  if (len > config.max_seq_len)
    throw InputError(fmt::format("source length {} exceeds max_seq_len {}", len,
                                 config.max_seq_len));
  Matrix x = embed(src, len, param(params, "encoder.embed"), config.src_vocab_size, "source");
  dropout.apply(x, tape.drop_src_embed);
  tape.enc_mask = key_mask(len, src_flags, len, false);
  tape.encoder.resize(config.num_layers);
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    const std::string name = layer_name("encoder", l);
    auto& lt = tape.encoder[l];
    lt.input = x;
    Matrix a = detail::mha_forward(x, x, AttentionRefs::from(params, name + ".self_attn"),
                                   config.num_heads, &tape.enc_mask, &lt.attn);
    dropout.apply(a, lt.drop_attn);
    lt.h1 = layer_norm(x + a, param(params, name + ".norm1.gamma"),
                       param(params, name + ".norm1.beta"), lt.norm1);
    Matrix f = ffn_forward(lt.h1, ffn_refs(params, name + ".ffn"), lt.ffn);
    dropout.apply(f, lt.drop_ffn);
    x = layer_norm(lt.h1 + f, param(params, name + ".norm2.gamma"),
                   param(params, name + ".norm2.beta"), lt.norm2);
  }
  tape.enc_out = x;
  return x;
}

Matrix decoder_forward(const TokenId* tgt_in, const std::uint8_t* tgt_flags, std::size_t len,
                       const Matrix& enc_out, const std::uint8_t* src_flags,
                       const Parameters& params, const ModelConfig& config, Dropout& dropout,
                       Tape& tape) {
  if (len > config.max_seq_len)
    throw InputError(fmt::format("target length {} exceeds max_seq_len {}", len,
                                 config.max_seq_len));
  Matrix y = embed(tgt_in, len, param(params, "decoder.embed"), config.tgt_vocab_size, "target");
  dropout.apply(y, tape.drop_tgt_embed);
  tape.self_mask = key_mask(len, tgt_flags, len, true);
  tape.cross_mask = key_mask(len, src_flags, static_cast<std::size_t>(enc_out.rows()), false);
  tape.decoder.resize(config.num_layers);
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    const std::string name = layer_name("decoder", l);
    auto& lt = tape.decoder[l];
    lt.input = y;
    Matrix a = detail::mha_forward(y, y, AttentionRefs::from(params, name + ".self_attn"),
                                   config.num_heads, &tape.self_mask, &lt.self_attn);
    dropout.apply(a, lt.drop_self);
    lt.h1 = layer_norm(y + a, param(params, name + ".norm1.gamma"),
                       param(params, name + ".norm1.beta"), lt.norm1);
    Matrix c = detail::mha_forward(lt.h1, enc_out,
                                   AttentionRefs::from(params, name + ".cross_attn"),
                                   config.num_heads, &tape.cross_mask, &lt.cross_attn);
    dropout.apply(c, lt.drop_cross);
    lt.h2 = layer_norm(lt.h1 + c, param(params, name + ".norm2.gamma"),
                       param(params, name + ".norm2.beta"), lt.norm2);
    Matrix f = ffn_forward(lt.h2, ffn_refs(params, name + ".ffn"), lt.ffn);
    dropout.apply(f, lt.drop_ffn);
    y = layer_norm(lt.h2 + f, param(params, name + ".norm3.gamma"),
                   param(params, name + ".norm3.beta"), lt.norm3);
  }
  tape.dec_out = y;
  return y;
}

Matrix output_logits(const Matrix& y, const Parameters& params) {
  Matrix logits = y * param(params, "output.W").matrix();
  logits.rowwise() += param(params, "output.b").vector();
  return logits;
}

// Gradient w.r.t. the encoder output is accumulated into `d_enc`.
void decoder_backward(Matrix d_y, const TokenId* tgt_in, std::size_t len, const Matrix& enc_out,
                      const Parameters& params, const ModelConfig& config, const Tape& tape,
                      Parameters& grads, Matrix& d_enc) {
  Matrix d_q;
  Matrix d_kv;
  for (std::size_t l = config.num_layers; l-- > 0;) {
    const std::string name = layer_name("decoder", l);
    const auto& lt = tape.decoder[l];

    Matrix d_sum = layer_norm_backward(d_y, lt.norm3, param(params, name + ".norm3.gamma"),
                                       param(grads, name + ".norm3.gamma"),
                                       param(grads, name + ".norm3.beta"));
    Matrix d_f = d_sum;
    Dropout::backward(d_f, lt.drop_ffn);
    auto fg = ffn_grads(grads, name + ".ffn");
    Matrix d_h2 = d_sum + ffn_backward(d_f, lt.h2, ffn_refs(params, name + ".ffn"), lt.ffn, fg);

    d_sum = layer_norm_backward(d_h2, lt.norm2, param(params, name + ".norm2.gamma"),
                                param(grads, name + ".norm2.gamma"),
                                param(grads, name + ".norm2.beta"));
    Matrix d_c = d_sum;
    Dropout::backward(d_c, lt.drop_cross);
    auto cg = AttentionGrads::from(grads, name + ".cross_attn");
    detail::mha_backward(d_c, lt.h1, enc_out, AttentionRefs::from(params, name + ".cross_attn"),
                         config.num_heads, lt.cross_attn, cg, d_q, d_kv);
    d_enc += d_kv;
    Matrix d_h1 = d_sum + d_q;

    d_sum = layer_norm_backward(d_h1, lt.norm1, param(params, name + ".norm1.gamma"),
                                param(grads, name + ".norm1.gamma"),
                                param(grads, name + ".norm1.beta"));
    Matrix d_a = d_sum;
    Dropout::backward(d_a, lt.drop_self);
    auto sg = AttentionGrads::from(grads, name + ".self_attn");
    detail::mha_backward(d_a, lt.input, lt.input,
                         AttentionRefs::from(params, name + ".self_attn"), config.num_heads,
                         lt.self_attn, sg, d_q, d_kv);
    d_y = d_sum + d_q + d_kv;
  }
  Dropout::backward(d_y, tape.drop_tgt_embed);
  embed_backward(d_y, tgt_in, len, param(grads, "decoder.embed"));
}

void encoder_backward(Matrix d_x, const TokenId* src, std::size_t len, const Parameters& params,
                      const ModelConfig& config, const Tape& tape, Parameters& grads) {
  Matrix d_q;
  Matrix d_kv;
  for (std::size_t l = config.num_layers; l-- > 0;) {
    const std::string name = layer_name("encoder", l);
    const auto& lt = tape.encoder[l];

    Matrix d_sum = layer_norm_backward(d_x, lt.norm2, param(params, name + ".norm2.gamma"),
                                       param(grads, name + ".norm2.gamma"),
                                       param(grads, name + ".norm2.beta"));
    Matrix d_f = d_sum;
    Dropout::backward(d_f, lt.drop_ffn);
    auto fg = ffn_grads(grads, name + ".ffn");
    Matrix d_h1 = d_sum + ffn_backward(d_f, lt.h1, ffn_refs(params, name + ".ffn"), lt.ffn, fg);

    d_sum = layer_norm_backward(d_h1, lt.norm1, param(params, name + ".norm1.gamma"),
                                param(grads, name + ".norm1.gamma"),
                                param(grads, name + ".norm1.beta"));
    Matrix d_a = d_sum;
    Dropout::backward(d_a, lt.drop_attn);
    auto ag = AttentionGrads::from(grads, name + ".self_attn");
    detail::mha_backward(d_a, lt.input, lt.input,
                         AttentionRefs::from(params, name + ".self_attn"), config.num_heads,
                         lt.attn, ag, d_q, d_kv);
    d_x = d_sum + d_q + d_kv;
  }
  Dropout::backward(d_x, tape.drop_src_embed);
  embed_backward(d_x, src, len, param(grads, "encoder.embed"));
}

Eigen::VectorXd row_log_softmax(const Matrix& logits, Eigen::Index r) {
  const auto row = logits.row(r);
  const double top = row.maxCoeff();
  const double lse = top + std::log((row.array() - top).exp().sum());
  return (row.array() - lse).transpose();
}

void check_batch(const Batch& b) {
  const std::size_t src_n = b.batch_size * b.src_len;
  const std::size_t tgt_n = b.batch_size * b.tgt_len;
  if (b.src_ids.size() != src_n || b.src_mask.size() != src_n || b.tgt_in_ids.size() != tgt_n ||
      b.tgt_out_ids.size() != tgt_n || b.tgt_mask.size() != tgt_n)
    throw ShapeError("batch arrays do not match [batch x time]");
}

}  // namespace

// ---- configuration ----------------------------------------------------------

void ModelConfig::validate() const {
  if (num_layers == 0) throw ConfigError("num_layers must be at least 1");
  if (d_model == 0 || num_heads == 0 || d_ff == 0) throw ConfigError("model sizes must be positive");
  if (d_model % num_heads != 0)
    throw ConfigError(fmt::format("d_model {} is not divisible by num_heads {}", d_model, num_heads));
  if (max_seq_len < 1) throw ConfigError("max_seq_len must be at least 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw ConfigError("dropout_rate must lie in [0, 1)");
  if (src_vocab_size <= SpecialIds::count || tgt_vocab_size <= SpecialIds::count)
    throw ConfigError("vocabulary sizes must exceed the special tokens");
}

KeyValues ModelConfig::to_keyvalues() const {
  KeyValues kv;
  kv.set("num_layers", std::to_string(num_layers));
  kv.set("d_model", std::to_string(d_model));
  kv.set("num_heads", std::to_string(num_heads));
  kv.set("d_ff", std::to_string(d_ff));
  kv.set("max_seq_len", std::to_string(max_seq_len));
  kv.set("dropout_rate", format_double(dropout_rate));
  kv.set("src_vocab_size", std::to_string(src_vocab_size));
  kv.set("tgt_vocab_size", std::to_string(tgt_vocab_size));
  return kv;
}

ModelConfig ModelConfig::from_keyvalues(const KeyValues& kv) {
  auto count = [&](const char* key) {
    const auto v = kv.get_int(key);
    if (v < 0) throw ConfigError(kv.origin() + ": " + key + " must be non-negative");
    return static_cast<std::size_t>(v);
  };
  ModelConfig c;
  c.num_layers = count("num_layers");
  c.d_model = count("d_model");
  c.num_heads = count("num_heads");
  c.d_ff = count("d_ff");
  c.max_seq_len = count("max_seq_len");
  c.dropout_rate = kv.get_double("dropout_rate");
  c.src_vocab_size = count("src_vocab_size");
  c.tgt_vocab_size = count("tgt_vocab_size");
  c.validate();
  return c;
}

// ---- parameters -----------------------------------------------------------

std::vector<ParameterSpec> parameter_inventory(const ModelConfig& config) {
  config.validate();
  const std::size_t d = config.d_model;
  std::vector<ParameterSpec> specs;
  auto attention = [&](const std::string& prefix) {
    for (const char* t : kAttentionTensors) {
      const bool weight = t[0] == 'W';
      specs.push_back({prefix + "." + t, weight ? Shape{d, d} : Shape{d}});
    }
  };
  auto norm = [&](const std::string& prefix) {
    specs.push_back({prefix + ".gamma", {d}});
    specs.push_back({prefix + ".beta", {d}});
  };
  auto ffn = [&](const std::string& prefix) {
    specs.push_back({prefix + ".W1", {d, config.d_ff}});
    specs.push_back({prefix + ".b1", {config.d_ff}});
    specs.push_back({prefix + ".W2", {config.d_ff, d}});
    specs.push_back({prefix + ".b2", {d}});
  };

  specs.push_back({"encoder.embed", {config.src_vocab_size, d}});
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    const auto name = layer_name("encoder", l);
    attention(name + ".self_attn");
    norm(name + ".norm1");
    ffn(name + ".ffn");
    norm(name + ".norm2");
  }
  specs.push_back({"decoder.embed", {config.tgt_vocab_size, d}});
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    const auto name = layer_name("decoder", l);
    attention(name + ".self_attn");
    norm(name + ".norm1");
    attention(name + ".cross_attn");
    norm(name + ".norm2");
    ffn(name + ".ffn");
    norm(name + ".norm3");
  }
  specs.push_back({"output.W", {d, config.tgt_vocab_size}});
  specs.push_back({"output.b", {config.tgt_vocab_size}});
  return specs;
}

Parameters init_parameters(const ModelConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  Parameters params;
  const double embed_bound = 1.0 / std::sqrt(static_cast<double>(config.d_model));
  for (const auto& spec : parameter_inventory(config)) {
    Tensor t(spec.shape);
    const auto& n = spec.name;
    const bool is_embed = n.ends_with(".embed");
    if (n.ends_with(".gamma")) {
      t.fill(1.0);
    } else if (is_embed || spec.shape.size() == 2) {
      const double bound =
          is_embed ? embed_bound
                   : std::sqrt(6.0 / static_cast<double>(spec.shape[0] + spec.shape[1]));
      for (auto& v : t.values()) v = rng.uniform(-bound, bound);
    }
    params.emplace(n, std::move(t));
  }
  return params;
}

void check_parameters(const Parameters& params, const ModelConfig& config) {
  const auto specs = parameter_inventory(config);
  if (specs.size() != params.size())
    throw ShapeError(fmt::format("expected {} parameter tensors, found {}", specs.size(),
                                 params.size()));
  for (const auto& spec : specs) {
    auto it = params.find(spec.name);
    if (it == params.end()) throw ShapeError("missing parameter " + spec.name);
    if (it->second.shape() != spec.shape)
      throw ShapeError(fmt::format("parameter {} has shape {}, expected {}", spec.name,
                                   shape_string(it->second.shape()), shape_string(spec.shape)));
  }
}

// ---- batches --------------------------------------------------------------

Batch Batch::from_examples(const std::vector<Example>& examples) {
  Batch b;
  b.batch_size = examples.size();
  for (const auto& ex : examples) {
    if (ex.tgt.size() < 2) throw InputError("target sequence must be framed with BOS and EOS");
    b.src_len = std::max(b.src_len, ex.src.size());
    b.tgt_len = std::max(b.tgt_len, ex.tgt.size() - 1);
  }
  b.src_ids.assign(b.batch_size * b.src_len, SpecialIds::pad);
  b.src_mask.assign(b.batch_size * b.src_len, 0);
  b.tgt_in_ids.assign(b.batch_size * b.tgt_len, SpecialIds::pad);
  b.tgt_out_ids.assign(b.batch_size * b.tgt_len, SpecialIds::pad);
  b.tgt_mask.assign(b.batch_size * b.tgt_len, 0);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& src = examples[i].src.ids;
    const auto& tgt = examples[i].tgt.ids;
    for (std::size_t t = 0; t < src.size(); ++t) {
      b.src_ids[i * b.src_len + t] = src[t];
      b.src_mask[i * b.src_len + t] = 1;
    }
    for (std::size_t t = 0; t + 1 < tgt.size(); ++t) {
      b.tgt_in_ids[i * b.tgt_len + t] = tgt[t];
      b.tgt_out_ids[i * b.tgt_len + t] = tgt[t + 1];
      b.tgt_mask[i * b.tgt_len + t] = 1;
    }
  }
  return b;
}

std::size_t Batch::target_tokens() const {
  std::size_t n = 0;
  for (auto m : tgt_mask) n += m;
  return n;
}

// ---- forward / loss / backward --------------------------------------------

Tensor forward(const Batch& batch, const Parameters& params, const ModelConfig& config,
               bool train_mode, Rng* dropout_rng) {
  check_batch(batch);
  check_parameters(params, config);
  const std::size_t vocab = config.tgt_vocab_size;
  Tensor logits({batch.batch_size, batch.tgt_len, vocab});
  Dropout dropout(config.dropout_rate, train_mode, dropout_rng);
  Tape tape;
  for (std::size_t b = 0; b < batch.batch_size; ++b) {
    const TokenId* src = batch.src_ids.data() + b * batch.src_len;
    const std::uint8_t* src_flags = batch.src_mask.data() + b * batch.src_len;
    const Matrix enc = encoder_forward(src, src_flags, batch.src_len, params, config, dropout, tape);
    const Matrix y = decoder_forward(batch.tgt_in_ids.data() + b * batch.tgt_len,
                                     batch.tgt_mask.data() + b * batch.tgt_len, batch.tgt_len, enc,
                                     src_flags, params, config, dropout, tape);
    const Matrix out = output_logits(y, params);
    std::copy_n(out.data(), out.size(), logits.data() + b * batch.tgt_len * vocab);
  }
  return logits;
}

double loss(const Tensor& logits, const std::vector<TokenId>& tgt_out_ids,
            const std::vector<std::uint8_t>& tgt_mask) {
  if (logits.rank() != 3) throw ShapeError("loss expects [batch, time, vocab] logits");
  const std::size_t rows = logits.dim(0) * logits.dim(1);
  const std::size_t vocab = logits.dim(2);
  if (tgt_out_ids.size() != rows || tgt_mask.size() != rows)
    throw ShapeError("loss: targets do not match the logits");
  const ConstMatrixMap flat(logits.data(), static_cast<Eigen::Index>(rows),
                            static_cast<Eigen::Index>(vocab));
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!tgt_mask[r]) continue;
    const auto row = flat.row(static_cast<Eigen::Index>(r));
    const double top = row.maxCoeff();
    const double lse = top + std::log((row.array() - top).exp().sum());
    total += lse - row(tgt_out_ids[r]);
    ++count;
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

Gradients backward(const Batch& batch, const Parameters& params, const ModelConfig& config,
                   double loss_scale, bool train_mode, Rng* dropout_rng) {
  check_batch(batch);
  check_parameters(params, config);
  Gradients out;
  out.grads = zeros_like(params);
  out.tokens = batch.target_tokens();
  if (out.tokens == 0) return out;
  const double token_scale = loss_scale / static_cast<double>(out.tokens);

  Dropout dropout(config.dropout_rate, train_mode, dropout_rng);
  Tape tape;
  double total = 0.0;
  for (std::size_t b = 0; b < batch.batch_size; ++b) {
    const TokenId* src = batch.src_ids.data() + b * batch.src_len;
    const std::uint8_t* src_flags = batch.src_mask.data() + b * batch.src_len;
    const TokenId* tgt_in = batch.tgt_in_ids.data() + b * batch.tgt_len;
    const TokenId* tgt_out = batch.tgt_out_ids.data() + b * batch.tgt_len;
    const std::uint8_t* tgt_flags = batch.tgt_mask.data() + b * batch.tgt_len;

    const Matrix enc = encoder_forward(src, src_flags, batch.src_len, params, config, dropout, tape);
    const Matrix y = decoder_forward(tgt_in, tgt_flags, batch.tgt_len, enc, src_flags, params,
                                     config, dropout, tape);
    const Matrix logits = output_logits(y, params);

    Matrix d_logits = Matrix::Zero(logits.rows(), logits.cols());
    for (std::size_t t = 0; t < batch.tgt_len; ++t) {
      if (!tgt_flags[t]) continue;
      const auto r = static_cast<Eigen::Index>(t);
      const Eigen::VectorXd log_p = row_log_softmax(logits, r);
      total -= log_p(tgt_out[t]);
      d_logits.row(r) = log_p.array().exp().transpose() * token_scale;
      d_logits(r, tgt_out[t]) -= token_scale;
    }

    param(out.grads, "output.W").matrix().noalias() += y.transpose() * d_logits;
    param(out.grads, "output.b").vector() += d_logits.colwise().sum();
    const Matrix d_y = d_logits * param(params, "output.W").matrix().transpose();

    Matrix d_enc = Matrix::Zero(enc.rows(), enc.cols());
    decoder_backward(d_y, tgt_in, batch.tgt_len, enc, params, config, tape, out.grads, d_enc);
    encoder_backward(d_enc, src, batch.src_len, params, config, tape, out.grads);
  }
  out.loss = total / static_cast<double>(out.tokens);
  return out;
}

// ---- incremental decoding helpers -------------------------------------------

EncodedSource encode_source(const IdSequence& src, const Parameters& params,
                            const ModelConfig& config) {
  check_parameters(params, config);
  EncodedSource out;
  out.mask.assign(src.size(), 1);
  Dropout off(0.0, false, nullptr);
  Tape tape;
  out.states = encoder_forward(src.ids.data(), out.mask.data(), src.size(), params, config, off, tape);
  return out;
}

std::vector<double> next_token_log_probs(const EncodedSource& source,
                                         const std::vector<TokenId>& prefix,
                                         const Parameters& params, const ModelConfig& config) {
  if (prefix.empty()) throw InputError("decoder prefix must start with BOS");
  const std::vector<std::uint8_t> flags(prefix.size(), 1);
  Dropout off(0.0, false, nullptr);
  Tape tape;
  const Matrix y = decoder_forward(prefix.data(), flags.data(), prefix.size(), source.states,
                                   source.mask.data(), params, config, off, tape);
  const Matrix last = output_logits(y.bottomRows(1), params);
  const Eigen::VectorXd lp = row_log_softmax(last, 0);
  return std::vector<double>(lp.data(), lp.data() + lp.size());
}

}  // namespace pivotmt
