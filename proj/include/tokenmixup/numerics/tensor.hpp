#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "tokenmixup/common.hpp"

namespace tkmx::inline TKMX_ABI {

using Dims = std::vector<std::size_t>;

std::size_t dims_product(const Dims& dims);
std::string dims_to_string(const Dims& dims);

/// Dense row-major tensor of Scalar values.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Dims dims, Scalar fill = Scalar(0));
  Tensor(Dims dims, std::vector<Scalar> data);

  static Tensor from(Dims dims, std::initializer_list<Scalar> values);
  static Tensor scalar(Scalar v) { return Tensor({1}, std::vector<Scalar>{v}); }

  const Dims& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<Scalar> data() { return data_; }
  std::span<const Scalar> data() const { return data_; }
  std::vector<Scalar>& storage() { return data_; }
  const std::vector<Scalar>& storage() const { return data_; }

  Scalar& operator[](std::size_t i) { return data_[i]; }
  Scalar operator[](std::size_t i) const { return data_[i]; }

  Scalar& at(std::size_t i, std::size_t j);
  Scalar at(std::size_t i, std::size_t j) const;
  Scalar& at(std::size_t i, std::size_t j, std::size_t k);
  Scalar at(std::size_t i, std::size_t j, std::size_t k) const;

  /// Same data under new dims; the element count must not change.
  Tensor reshaped(Dims dims) const;

  /// Row `i` of the leading axis, as a tensor of the trailing dims.
  Tensor slice0(std::size_t i) const;
  void set_slice0(std::size_t i, const Tensor& row);

  void fill(Scalar v);
  bool same_shape(const Tensor& other) const { return dims_ == other.dims_; }
  bool all_finite() const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.dims_ == b.dims_ && a.data_ == b.data_;
  }

 private:
  Dims dims_;
  std::vector<Scalar> data_;
};

/// Bit-level equality (distinguishes -0.0 from 0.0 and compares NaN payloads).
bool bitwise_equal(const Tensor& a, const Tensor& b);

Scalar max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace tkmx::inline TKMX_ABI
