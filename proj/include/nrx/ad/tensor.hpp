// SPDX-License-Identifier: Apache-2.0
//
// Copyright (C) 2026 The nrxsim authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace nrx::ad {

using Shape = std::vector<std::int64_t>;

inline std::int64_t num_elements(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

/// Dense row-major real tensor. Complex quantities are carried as separate
/// real and imaginary channels.
template <typename Scalar>
class Tensor {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(std::move(shape)), values_(Array::Zero(num_elements(shape_))) {}
  Tensor(Shape shape, Array values) : shape_(std::move(shape)), values_(std::move(values)) {
    if (num_elements(shape_) != values_.size()) {
      throw std::invalid_argument("tensor shape " + to_string(shape_) + " does not match " +
                                  std::to_string(values_.size()) + " values");
    }
  }

  static Tensor constant(Shape shape, Scalar value) {
    Tensor t(std::move(shape));
    t.values_.setConstant(value);
    return t;
  }

  const Shape& shape() const { return shape_; }
  std::int64_t rank() const { return static_cast<std::int64_t>(shape_.size()); }
  std::int64_t dim(std::int64_t i) const { return shape_.at(static_cast<std::size_t>(i < 0 ? rank() + i : i)); }
  std::int64_t size() const { return values_.size(); }

  Array& values() { return values_; }
  const Array& values() const { return values_; }
  Scalar* data() { return values_.data(); }
  const Scalar* data() const { return values_.data(); }
  Scalar& operator[](std::int64_t i) { return values_[i]; }
  Scalar operator[](std::int64_t i) const { return values_[i]; }

  /// Row-major matrix view with the last dimension as columns.
  Eigen::Map<RowMatrix> matrix() { return {data(), rows(), cols()}; }
  Eigen::Map<const RowMatrix> matrix() const { return {data(), rows(), cols()}; }

  std::int64_t cols() const { return shape_.empty() ? 1 : shape_.back(); }
  std::int64_t rows() const { return cols() == 0 ? 0 : size() / cols(); }

  Tensor reshaped(Shape shape) const { return Tensor(std::move(shape), values_); }

  bool all_finite() const { return values_.allFinite(); }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, values_.template cast<Other>());
  }

 private:
  Shape shape_{};
  Array values_{};
};

/// Ordered name -> tensor map (parameters, gradients, optimizer moments).
template <typename Scalar>
using NamedTensors = std::map<std::string, Tensor<Scalar>>;

template <typename Scalar>
std::int64_t total_size(const NamedTensors<Scalar>& tensors) {
  std::int64_t n = 0;
  for (const auto& [name, t] : tensors) n += t.size();
  return n;
}

}  // namespace nrx::ad
