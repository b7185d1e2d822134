#include "tokenmixup/numerics/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace tkmx::inline TKMX_ABI {

std::size_t dims_product(const Dims& dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::string dims_to_string(const Dims& dims) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << ", ";
    os << dims[i];
  }
  os << ')';
  return os.str();
}

Tensor::Tensor(Dims dims, Scalar fill) : dims_(std::move(dims)) {
  for (auto d : dims_) {
    if (d == 0) throw ShapeError("tensor dims must be positive: " + dims_to_string(dims_));
  }
  data_.assign(dims_product(dims_), fill);
}

Tensor::Tensor(Dims dims, std::vector<Scalar> data) : dims_(std::move(dims)), data_(std::move(data)) {
  for (auto d : dims_) {
    if (d == 0) throw ShapeError("tensor dims must be positive: " + dims_to_string(dims_));
  }
  if (dims_product(dims_) != data_.size()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match dims " +
                     dims_to_string(dims_));
  }
}

Tensor Tensor::from(Dims dims, std::initializer_list<Scalar> values) {
  return Tensor(std::move(dims), std::vector<Scalar>(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= dims_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + dims_to_string(dims_));
  }
  return dims_[axis];
}

Scalar& Tensor::at(std::size_t i, std::size_t j) { return data_[i * dims_[1] + j]; }
Scalar Tensor::at(std::size_t i, std::size_t j) const { return data_[i * dims_[1] + j]; }

Scalar& Tensor::at(std::size_t i, std::size_t j, std::size_t k) {
  return data_[(i * dims_[1] + j) * dims_[2] + k];
}
Scalar Tensor::at(std::size_t i, std::size_t j, std::size_t k) const {
  return data_[(i * dims_[1] + j) * dims_[2] + k];
}

Tensor Tensor::reshaped(Dims dims) const {
  if (dims_product(dims) != data_.size()) {
    throw ShapeError("cannot reshape " + dims_to_string(dims_) + " to " + dims_to_string(dims));
  }
  return Tensor(std::move(dims), data_);
}

Tensor Tensor::slice0(std::size_t i) const {
  if (dims_.empty() || i >= dims_[0]) throw ShapeError("slice0 index out of range");
  Dims rest(dims_.begin() + 1, dims_.end());
  if (rest.empty()) rest = {1};
  const std::size_t stride = data_.size() / dims_[0];
  return Tensor(rest, std::vector<Scalar>(data_.begin() + i * stride, data_.begin() + (i + 1) * stride));
}

void Tensor::set_slice0(std::size_t i, const Tensor& row) {
  if (dims_.empty() || i >= dims_[0]) throw ShapeError("set_slice0 index out of range");
  const std::size_t stride = data_.size() / dims_[0];
  if (row.size() != stride) throw ShapeError("set_slice0 row size mismatch");
  std::copy(row.storage().begin(), row.storage().end(), data_.begin() + i * stride);
}

void Tensor::fill(Scalar v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](Scalar v) { return std::isfinite(v); });
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (a.dims() != b.dims()) return false;
  return std::memcmp(a.storage().data(), b.storage().data(), a.size() * sizeof(Scalar)) == 0;
}

Scalar max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("max_abs_diff: " + dims_to_string(a.dims()) + " vs " + dims_to_string(b.dims()));
  }
  Scalar m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace tkmx::inline TKMX_ABI
