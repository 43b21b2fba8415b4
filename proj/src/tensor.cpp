#include "pivotmt/tensor.hpp"

#include <cmath>

#include "pivotmt/error.hpp"

namespace pivotmt {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != shape_size(shape_))
    throw ShapeError("tensor of shape " + shape_string(shape_) + " given " +
                     std::to_string(values_.size()) + " values");
}

Tensor Tensor::from_matrix(const Matrix& m) {
  Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  t.matrix() = m;
  return t;
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size())
    throw ShapeError("index rank " + std::to_string(index.size()) + " for tensor " +
                     shape_string(shape_));
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= shape_[axis]) throw ShapeError("index out of range for tensor " + shape_string(shape_));
    flat = flat * shape_[axis] + i;
    ++axis;
  }
  return flat;
}

double& Tensor::at(std::initializer_list<std::size_t> index) { return values_[offset(index)]; }

double Tensor::at(std::initializer_list<std::size_t> index) const {
  return values_[offset(index)];
}

MatrixMap Tensor::matrix() {
  if (rank() == 1) return {values_.data(), 1, static_cast<Eigen::Index>(shape_[0])};
  if (rank() != 2) throw ShapeError("matrix view of tensor " + shape_string(shape_));
  return {values_.data(), static_cast<Eigen::Index>(shape_[0]),
          static_cast<Eigen::Index>(shape_[1])};
}

ConstMatrixMap Tensor::matrix() const {
  if (rank() == 1) return {values_.data(), 1, static_cast<Eigen::Index>(shape_[0])};
  if (rank() != 2) throw ShapeError("matrix view of tensor " + shape_string(shape_));
  return {values_.data(), static_cast<Eigen::Index>(shape_[0]),
          static_cast<Eigen::Index>(shape_[1])};
}

VectorMap Tensor::vector() {
  if (rank() != 1) throw ShapeError("vector view of tensor " + shape_string(shape_));
  return {values_.data(), static_cast<Eigen::Index>(shape_[0])};
}

ConstVectorMap Tensor::vector() const {
  if (rank() != 1) throw ShapeError("vector view of tensor " + shape_string(shape_));
  return {values_.data(), static_cast<Eigen::Index>(shape_[0])};
}

bool Tensor::all_finite() const {
  for (double v : values_)
    if (!std::isfinite(v)) return false;
  return true;
}

void Tensor::fill(double value) { std::fill(values_.begin(), values_.end(), value); }

Parameters zeros_like(const Parameters& like) {
  Parameters out;
  for (const auto& [name, t] : like) out.emplace(name, Tensor(t.shape()));
  return out;
}

}  // namespace pivotmt
