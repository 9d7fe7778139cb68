// Copyright 2026 The hashlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "hashlab/errors.hpp"

namespace hashlab {

using Shape = std::vector<std::size_t>;

/// Row-major dynamic matrix used for code batches and solver state.
template <class Real>
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Contiguous buffer aligned for Eigen's packet loads. Vectorized reductions
/// peel until the first aligned element, so a fixed base alignment is what
/// keeps their summation order, and therefore training, reproducible.
template <class Real>
using AlignedVector = std::vector<Real, Eigen::aligned_allocator<Real>>;

/// +-1 matrices (shadow codes, binary database codes).
using SignMatrix = Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

/// Dense row-major n-dimensional array.
template <class Real>
class Tensor {
 public:
  using value_type = Real;

  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = Real(0))
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
    for (auto e : shape_)
      if (e == 0) throw ConfigError("tensor extents must be positive, got " + shape_string(shape_));
  }
  Tensor(Shape shape, const std::vector<Real>& data) : Tensor(std::move(shape), AlignedVector<Real>(data.begin(), data.end())) {}
  Tensor(Shape shape, AlignedVector<Real> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != data_.size())
      throw ConfigError("tensor data length " + std::to_string(data_.size()) +
                        " does not match shape " + shape_string(shape_));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  Real* data() noexcept { return data_.data(); }
  const Real* data() const noexcept { return data_.data(); }
  std::span<Real> values() noexcept { return data_; }
  std::span<const Real> values() const noexcept { return data_; }
  AlignedVector<Real>& storage() noexcept { return data_; }
  const AlignedVector<Real>& storage() const noexcept { return data_; }

  Real& operator[](std::size_t i) noexcept { return data_[i]; }
  Real operator[](std::size_t i) const noexcept { return data_[i]; }

  /// Contiguous slice of the leading axis (e.g. one image of a batch).
  std::span<Real> slice(std::size_t i) {
    const std::size_t stride = data_.size() / shape_.at(0);
    return std::span<Real>(data_).subspan(i * stride, stride);
  }
  std::span<const Real> slice(std::size_t i) const {
    const std::size_t stride = data_.size() / shape_.at(0);
    return std::span<const Real>(data_).subspan(i * stride, stride);
  }

  void fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](Real v) { return std::isfinite(v); });
  }

  template <class Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, AlignedVector<Other>(data_.begin(), data_.end()));
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  AlignedVector<Real> data_;
};

/// View a rank-2 tensor as an Eigen matrix.
template <class Real>
auto as_matrix(Tensor<Real>& t) {
  return Eigen::Map<Matrix<Real>>(t.data(), static_cast<Eigen::Index>(t.dim(0)),
                                  static_cast<Eigen::Index>(t.size() / t.dim(0)));
}
template <class Real>
auto as_matrix(const Tensor<Real>& t) {
  return Eigen::Map<const Matrix<Real>>(t.data(), static_cast<Eigen::Index>(t.dim(0)),
                                        static_cast<Eigen::Index>(t.size() / t.dim(0)));
}

template <class Real>
Matrix<Real> to_matrix(const Tensor<Real>& t) {
  return as_matrix(t);
}

}  // namespace hashlab
