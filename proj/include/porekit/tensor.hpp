// Copyright 2026 The Porekit Authors
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

#ifndef POREKIT_TENSOR_HPP_
#define POREKIT_TENSOR_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "porekit/common.hpp"

namespace porekit {

// Dense N-d array in row-major order with an optional same-shape gradient
// buffer. Activations and weights use batch x height x width x channel layout.
template <typename S>
class Tensor {
 public:
  using Buffer = Eigen::Array<S, Eigen::Dynamic, 1>;

  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_ = Buffer::Zero(numel(shape_));
  }

  Tensor(std::vector<int> shape, Buffer data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    PK_CHECK(numel(shape_) == data_.size(), ErrorKind::kInvalidShape,
             "tensor data length does not match shape");
  }

  static Tensor constant(std::vector<int> shape, S value) {
    Tensor t(std::move(shape));
    t.data_.setConstant(value);
    return t;
  }

  static std::int64_t numel(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
      PK_CHECK(d >= 0, ErrorKind::kInvalidShape, "negative tensor extent");
      n *= d;
    }
    return n;
  }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::int64_t size() const { return data_.size(); }

  Buffer& array() { return data_; }
  const Buffer& array() const { return data_; }
  S* data() { return data_.data(); }
  const S* data() const { return data_.data(); }

  S& operator[](std::int64_t i) { return data_[i]; }
  S operator[](std::int64_t i) const { return data_[i]; }

  // 4-d accessors (n, h, w, c).
  std::int64_t index4(int n, int h, int w, int c) const {
    return ((static_cast<std::int64_t>(n) * shape_[1] + h) * shape_[2] + w) *
               shape_[3] +
           c;
  }
  S& at(int n, int h, int w, int c) { return data_[index4(n, h, w, c)]; }
  S at(int n, int h, int w, int c) const { return data_[index4(n, h, w, c)]; }

  bool has_grad() const { return grad_.size() == data_.size() && data_.size() > 0; }
  Buffer& grad() {
    PK_CHECK(has_grad(), ErrorKind::kInvalidShape, "gradient buffer not allocated");
    return grad_;
  }
  const Buffer& grad() const {
    PK_CHECK(has_grad(), ErrorKind::kInvalidShape, "gradient buffer not allocated");
    return grad_;
  }
  void ensure_grad() {
    if (!has_grad()) grad_ = Buffer::Zero(data_.size());
  }
  void zero_grad() {
    if (has_grad()) grad_.setZero();
  }
  void drop_grad() { grad_.resize(0); }

  template <typename T>
  Tensor<T> cast() const {
    Tensor<T> out(shape_);
    out.array() = data_.template cast<T>();
    return out;
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  std::string shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape_[i]);
    }
    return s + "]";
  }

 private:
  std::vector<int> shape_;
  Buffer data_;
  Buffer grad_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace porekit

#endif  // POREKIT_TENSOR_HPP_
