#include "pivotmt/attention.hpp"

#include <cmath>

#include "pivotmt/error.hpp"

namespace pivotmt {

namespace detail {

namespace {

const Tensor& find(const Parameters& params, const std::string& name) {
  auto it = params.find(name);
  if (it == params.end()) throw ShapeError("missing parameter " + name);
  return it->second;
}

Tensor& find(Parameters& params, const std::string& name) {
  auto it = params.find(name);
  if (it == params.end()) throw ShapeError("missing parameter " + name);
  return it->second;
}

Matrix affine(const Matrix& x, const Tensor& w, const Tensor& b) {
  Matrix out = x * w.matrix();
  out.rowwise() += b.vector();
  return out;
}

}  // namespace

AttentionRefs AttentionRefs::from(const Parameters& params, const std::string& prefix) {
  return {find(params, prefix + ".Wq"), find(params, prefix + ".Wk"), find(params, prefix + ".Wv"),
          find(params, prefix + ".Wo"), find(params, prefix + ".bq"), find(params, prefix + ".bk"),
          find(params, prefix + ".bv"), find(params, prefix + ".bo")};
}

AttentionGrads AttentionGrads::from(Parameters& grads, const std::string& prefix) {
  return {find(grads, prefix + ".Wq"), find(grads, prefix + ".Wk"), find(grads, prefix + ".Wv"),
          find(grads, prefix + ".Wo"), find(grads, prefix + ".bq"), find(grads, prefix + ".bk"),
          find(grads, prefix + ".bv"), find(grads, prefix + ".bo")};
}

void attend(const Matrix& q, const Matrix& k, const Matrix& v, const Matrix* mask, Matrix& weights,
            Matrix& out) {
  if (q.cols() != k.cols()) throw ShapeError("attention: Q and K key dimensions differ");
  if (k.rows() != v.rows()) throw ShapeError("attention: K and V time dimensions differ");
  if (mask && (mask->rows() != q.rows() || mask->cols() != k.rows()))
    throw ShapeError("attention: mask shape does not match [Tq, Tk]");

  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  weights.noalias() = (q * k.transpose()) * scale;
  if (mask) weights += *mask;
  for (Eigen::Index r = 0; r < weights.rows(); ++r) {
    auto row = weights.row(r);
    const double top = row.maxCoeff();
    if (top == -std::numeric_limits<double>::infinity()) {
      row.setZero();
      continue;
    }
    row = (row.array() - top).unaryExpr([](double s) { return std::exp(s); });
    row /= row.sum();
  }
  out.noalias() = weights * v;
}

Matrix mha_forward(const Matrix& x_q, const Matrix& x_kv, const AttentionRefs& p,
                   std::size_t num_heads, const Matrix* mask, AttentionCache* cache) {
  const Eigen::Index d_model = p.wq.matrix().cols();
  if (num_heads == 0 || d_model % static_cast<Eigen::Index>(num_heads) != 0)
    throw ShapeError("attention: d_model not divisible by the head count");
  if (x_q.cols() != p.wq.matrix().rows() || x_kv.cols() != p.wk.matrix().rows())
    throw ShapeError("attention: input width does not match the projections");
  const Eigen::Index d_head = d_model / static_cast<Eigen::Index>(num_heads);

  AttentionCache local;
  AttentionCache& c = cache ? *cache : local;
  c.q = affine(x_q, p.wq, p.bq);
  c.k = affine(x_kv, p.wk, p.bk);
  c.v = affine(x_kv, p.wv, p.bv);
  c.weights.resize(num_heads);
  c.concat.resize(x_q.rows(), d_model);

  Matrix out_h;
  for (std::size_t h = 0; h < num_heads; ++h) {
    const Eigen::Index col = static_cast<Eigen::Index>(h) * d_head;
    const Matrix q_h = c.q.middleCols(col, d_head);
    const Matrix k_h = c.k.middleCols(col, d_head);
    const Matrix v_h = c.v.middleCols(col, d_head);
    attend(q_h, k_h, v_h, mask, c.weights[h], out_h);
    c.concat.middleCols(col, d_head) = out_h;
  }
  return affine(c.concat, p.wo, p.bo);
}

void mha_backward(const Matrix& d_out, const Matrix& x_q, const Matrix& x_kv,
                  const AttentionRefs& p, std::size_t num_heads, const AttentionCache& cache,
                  AttentionGrads& g, Matrix& d_xq, Matrix& d_xkv) {
  const Eigen::Index d_model = p.wq.matrix().cols();
  const Eigen::Index d_head = d_model / static_cast<Eigen::Index>(num_heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_head));

  g.wo.matrix().noalias() += cache.concat.transpose() * d_out;
  g.bo.vector() += d_out.colwise().sum();
  const Matrix d_concat = d_out * p.wo.matrix().transpose();

  Matrix d_q(x_q.rows(), d_model);
  Matrix d_k(x_kv.rows(), d_model);
  Matrix d_v(x_kv.rows(), d_model);
  for (std::size_t h = 0; h < num_heads; ++h) {
    const Eigen::Index col = static_cast<Eigen::Index>(h) * d_head;
    const Matrix& w = cache.weights[h];
    const Matrix d_o = d_concat.middleCols(col, d_head);
    const Matrix d_w = d_o * cache.v.middleCols(col, d_head).transpose();
    d_v.middleCols(col, d_head).noalias() = w.transpose() * d_o;
    const Eigen::VectorXd row_dot = (d_w.array() * w.array()).rowwise().sum();
    Matrix d_s = w.array() * (d_w.array().colwise() - row_dot.array());
    d_s *= scale;
    d_q.middleCols(col, d_head).noalias() = d_s * cache.k.middleCols(col, d_head);
    d_k.middleCols(col, d_head).noalias() = d_s.transpose() * cache.q.middleCols(col, d_head);
  }

  g.wq.matrix().noalias() += x_q.transpose() * d_q;
  g.bq.vector() += d_q.colwise().sum();
  g.wk.matrix().noalias() += x_kv.transpose() * d_k;
  g.bk.vector() += d_k.colwise().sum();
  g.wv.matrix().noalias() += x_kv.transpose() * d_v;
  g.bv.vector() += d_v.colwise().sum();

  d_xq.noalias() = d_q * p.wq.matrix().transpose();
  d_xkv.noalias() = d_k * p.wk.matrix().transpose();
  d_xkv.noalias() += d_v * p.wv.matrix().transpose();
}

}  // namespace detail

namespace {

struct BatchedView {
  std::size_t batch = 1;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

BatchedView view_of(const Tensor& t, const char* name) {
  if (t.rank() == 2) return {1, t.dim(0), t.dim(1)};
  if (t.rank() == 3) return {t.dim(0), t.dim(1), t.dim(2)};
  throw ShapeError(std::string("attention: ") + name + " must have rank 2 or 3, got " +
                   shape_string(t.shape()));
}

Matrix slice(const Tensor& t, const BatchedView& v, std::size_t b) {
  Matrix m(v.rows, v.cols);
  std::copy_n(t.data() + b * v.rows * v.cols, v.rows * v.cols, m.data());
  return m;
}

template <typename Emit>
void run_batched(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& mask,
                 Emit&& emit) {
  const auto vq = view_of(q, "Q");
  const auto vk = view_of(k, "K");
  const auto vv = view_of(v, "V");
  if (q.rank() != k.rank() || k.rank() != v.rank() || vq.batch != vk.batch ||
      vk.batch != vv.batch)
    throw ShapeError("attention: Q, K and V disagree on the batch axis");
  if (vq.cols != vk.cols) throw ShapeError("attention: Q and K key dimensions differ");
  if (vk.rows != vv.rows) throw ShapeError("attention: K and V time dimensions differ");

  bool per_batch = false;
  if (mask.size() > 0) {
    const auto vm = view_of(mask, "mask");
    if (vm.rows != vq.rows || vm.cols != vk.rows)
      throw ShapeError("attention: mask " + shape_string(mask.shape()) +
                       " is not broadcastable to [Tq, Tk]");
    per_batch = mask.rank() == 3;
    if (per_batch && (q.rank() != 3 || vm.batch != vq.batch))
      throw ShapeError("attention: mask batch axis does not match");
  }
  Matrix weights;
  Matrix out;
  Matrix m;
  for (std::size_t b = 0; b < vq.batch; ++b) {
    const Matrix* mp = nullptr;
    if (mask.size() > 0) {
      m = slice(mask, view_of(mask, "mask"), per_batch ? b : 0);
      mp = &m;
    }
    detail::attend(slice(q, vq, b), slice(k, vk, b), slice(v, vv, b), mp, weights, out);
    emit(b, weights, out);
  }
}

Shape with_batch(const Tensor& like, std::size_t rows, std::size_t cols) {
  if (like.rank() == 3) return {like.dim(0), rows, cols};
  return {rows, cols};
}

}  // namespace

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            const Tensor& mask) {
  const auto vq = view_of(q, "Q");
  const auto vv = view_of(v, "V");
  Tensor result(with_batch(q, vq.rows, vv.cols));
  run_batched(q, k, v, mask, [&](std::size_t b, const Matrix&, const Matrix& out) {
    std::copy_n(out.data(), out.size(), result.data() + b * out.size());
  });
  return result;
}

Tensor attention_weights(const Tensor& q, const Tensor& k, const Tensor& mask) {
  const auto vq = view_of(q, "Q");
  const auto vk = view_of(k, "K");
  Tensor result(with_batch(q, vq.rows, vk.rows));
  run_batched(q, k, k, mask, [&](std::size_t b, const Matrix& w, const Matrix&) {
    std::copy_n(w.data(), w.size(), result.data() + b * w.size());
  });
  return result;
}

Tensor multi_head_attention(const Tensor& x_q, const Tensor& x_kv, const Parameters& params,
                            const std::string& prefix, std::size_t num_heads,
                            const Tensor& mask) {
  if (x_q.rank() != 2 || x_kv.rank() != 2)
    throw ShapeError("multi-head attention expects [T, d_model] inputs");
  const auto refs = detail::AttentionRefs::from(params, prefix);
  Matrix m;
  const Matrix* mp = nullptr;
  if (mask.size() > 0) {
    if (mask.rank() != 2 || mask.dim(0) != x_q.dim(0) || mask.dim(1) != x_kv.dim(0))
      throw ShapeError("multi-head attention: mask must be [Tq, Tk]");
    m = mask.matrix();
    mp = &m;
  }
  return Tensor::from_matrix(
      detail::mha_forward(x_q.matrix(), x_kv.matrix(), refs, num_heads, mp, nullptr));
}

}  // namespace pivotmt
