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

#ifndef POREKIT_IMAGE_HPP_
#define POREKIT_IMAGE_HPP_

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "porekit/common.hpp"

namespace porekit {

// Grayscale image with float pixels in [0,1], row-major, (row, col) indexing
// with row increasing downward.
class GrayImage {
 public:
  using Array =
      Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  GrayImage() = default;
  GrayImage(int rows, int cols) : pixels_(Array::Zero(rows, cols)) {
    PK_CHECK(rows >= 0 && cols >= 0, ErrorKind::kInvalidArgument,
             "negative image extent");
  }
  explicit GrayImage(Array pixels) : pixels_(std::move(pixels)) {}

  int rows() const { return static_cast<int>(pixels_.rows()); }
  int cols() const { return static_cast<int>(pixels_.cols()); }
  bool empty() const { return pixels_.size() == 0; }

  float operator()(int r, int c) const { return pixels_(r, c); }
  float& operator()(int r, int c) { return pixels_(r, c); }

  bool in_bounds(int r, int c) const {
    return r >= 0 && r < rows() && c >= 0 && c < cols();
  }

  Array& array() { return pixels_; }
  const Array& array() const { return pixels_; }

 private:
  Array pixels_;
};

// Sub-pixel image coordinate; origin at the center of pixel (0,0).
struct Point {
  double row = 0.0;
  double col = 0.0;
};

inline double sq_dist(const Point& a, const Point& b) {
  const double dr = a.row - b.row, dc = a.col - b.col;
  return dr * dr + dc * dc;
}

// Rotation by `angle` about the coordinate origin followed by translation:
// apply(p) = R(angle) * p + t in (row, col) coordinates.
struct RigidTransform {
  double angle = 0.0;
  double t_row = 0.0;
  double t_col = 0.0;

  Point apply(const Point& p) const {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c * p.row - s * p.col + t_row, s * p.row + c * p.col + t_col};
  }

  RigidTransform inverse() const {
    const double c = std::cos(angle), s = std::sin(angle);
    return {-angle, -(c * t_row + s * t_col), -(-s * t_row + c * t_col)};
  }
};

// compose(a, b).apply(p) == a.apply(b.apply(p)).
inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  const Point t = a.apply({b.t_row, b.t_col});
  return {a.angle + b.angle, t.row, t.col};
}

}  // namespace porekit

#endif  // POREKIT_IMAGE_HPP_
