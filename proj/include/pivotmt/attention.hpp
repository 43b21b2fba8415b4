#pragma once

#include <limits>
#include <string>
#include <vector>

#include "pivotmt/tensor.hpp"

namespace pivotmt {

/// Additive mask entry that removes a key position before the softmax.
inline constexpr double kMaskedOut = -std::numeric_limits<double>::infinity();

/// softmax(Q Kᵀ / sqrt(d_k) + mask) V.
///
/// Q is [..., Tq, d_k], K is [..., Tk, d_k] and V is [..., Tk, d_v] with rank
/// 2 or 3 (a leading batch axis). `mask` is additive: empty for none,
/// [Tq, Tk] broadcast over the batch, or the full [..., Tq, Tk]. Masked keys
/// get weight exactly 0; a row with every key masked produces zeros.
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const Tensor& mask = {});

/// Same as `scaled_dot_attention` but returns the [..., Tq, Tk] weights.
Tensor attention_weights(const Tensor& q, const Tensor& k, const Tensor& mask = {});

/// Multi-head attention over [Tq, d_model] queries and [Tk, d_model]
/// keys/values using the tensors `<prefix>.{Wq,Wk,Wv,Wo,bq,bk,bv,bo}` from
/// `params`. Self-attention is the case x_q == x_kv.
Tensor multi_head_attention(const Tensor& x_q, const Tensor& x_kv, const Parameters& params,
                            const std::string& prefix, std::size_t num_heads,
                            const Tensor& mask = {});

namespace detail {

/// Borrowed views of one attention block's weights.
struct AttentionRefs {
  const Tensor& wq;
  const Tensor& wk;
  const Tensor& wv;
  const Tensor& wo;
  const Tensor& bq;
  const Tensor& bk;
  const Tensor& bv;
  const Tensor& bo;

  static AttentionRefs from(const Parameters& params, const std::string& prefix);
};

struct AttentionGrads {
  Tensor& wq;
  Tensor& wk;
  Tensor& wv;
  Tensor& wo;
  Tensor& bq;
  Tensor& bk;
  Tensor& bv;
  Tensor& bo;

  static AttentionGrads from(Parameters& grads, const std::string& prefix);
};

/// Forward intermediates needed by `mha_backward`.
struct AttentionCache {
  Matrix q;
  Matrix k;
  Matrix v;
  std::vector<Matrix> weights;  // one [Tq, Tk] matrix per head
  Matrix concat;
};

/// Single-head kernel. `mask` may be null. Writes the softmax weights and the
/// attended values.
void attend(const Matrix& q, const Matrix& k, const Matrix& v, const Matrix* mask, Matrix& weights,
            Matrix& out);

Matrix mha_forward(const Matrix& x_q, const Matrix& x_kv, const AttentionRefs& p,
                   std::size_t num_heads, const Matrix* mask, AttentionCache* cache);

/// Accumulates weight gradients into `g` and writes the input gradients.
void mha_backward(const Matrix& d_out, const Matrix& x_q, const Matrix& x_kv,
                  const AttentionRefs& p, std::size_t num_heads, const AttentionCache& cache,
                  AttentionGrads& g, Matrix& d_xq, Matrix& d_xkv);

}  // namespace detail

}  // namespace pivotmt
