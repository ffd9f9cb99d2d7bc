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

#include "porekit/sift.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "porekit/common.hpp"
#include "porekit/image_ops.hpp"

namespace porekit {

namespace {

constexpr double kTwoPi = 6.283185307179586;
constexpr int kOriBins = 36;
constexpr int kGridBins = 4;
constexpr int kAngleBins = 8;

// Central-difference gradient; defined on the interior only.
struct Gradient {
  double mag = 0.0;
  double angle = 0.0;  // atan2(d/drow, d/dcol) wrapped to [0, 2pi)
  bool valid = false;
};

Gradient gradient_at(const GrayImage& img, int r, int c) {
  Gradient g;
  if (r < 1 || r >= img.rows() - 1 || c < 1 || c >= img.cols() - 1) return g;
  const double gr = static_cast<double>(img(r + 1, c)) - img(r - 1, c);
  const double gc = static_cast<double>(img(r, c + 1)) - img(r, c - 1);
  g.mag = std::sqrt(gr * gr + gc * gc);
  g.angle = std::atan2(gr, gc);
  if (g.angle < 0.0) g.angle += kTwoPi;
  g.valid = true;
  return g;
}

double dominant_orientation(const GrayImage& img, const Point& kp,
                            double scale, bool* any_support) {
  const double sigma = 1.5 * scale;
  const int radius = static_cast<int>(std::lround(3.0 * sigma));
  const int cr = static_cast<int>(std::lround(kp.row));
  const int cc = static_cast<int>(std::lround(kp.col));
  std::array<double, kOriBins> hist{};
  bool support = false;
  for (int dr = -radius; dr <= radius; ++dr) {
    for (int dc = -radius; dc <= radius; ++dc) {
      const Gradient g = gradient_at(img, cr + dr, cc + dc);
      if (!g.valid) continue;
      support = true;
      const double w =
          std::exp(-(static_cast<double>(dr) * dr + static_cast<double>(dc) * dc) /
                   (2.0 * sigma * sigma));
      int bin = static_cast<int>(g.angle * kOriBins / kTwoPi);
      if (bin >= kOriBins) bin = kOriBins - 1;
      hist[static_cast<std::size_t>(bin)] += w * g.mag;
    }
  }
  if (any_support != nullptr) *any_support = support;
  if (!support) return 0.0;

  // Circular smoothing stabilizes the peak against bin-quantization noise.
  for (int pass = 0; pass < 6; ++pass) {
    std::array<double, kOriBins> s{};
    for (int b = 0; b < kOriBins; ++b) {
      const double l = hist[static_cast<std::size_t>((b + kOriBins - 1) % kOriBins)];
      const double r = hist[static_cast<std::size_t>((b + 1) % kOriBins)];
      s[static_cast<std::size_t>(b)] = (l + hist[static_cast<std::size_t>(b)] + r) / 3.0;
    }
    hist = s;
  }

  int best = 0;
  for (int b = 1; b < kOriBins; ++b) {
    if (hist[static_cast<std::size_t>(b)] > hist[static_cast<std::size_t>(best)]) best = b;
  }
  const double hl = hist[static_cast<std::size_t>((best + kOriBins - 1) % kOriBins)];
  const double hc = hist[static_cast<std::size_t>(best)];
  const double hr = hist[static_cast<std::size_t>((best + 1) % kOriBins)];
  const double denom = hl - 2.0 * hc + hr;
  const double offset = denom == 0.0 ? 0.0 : 0.5 * (hl - hr) / denom;
  double theta = (best + 0.5 + std::clamp(offset, -0.5, 0.5)) * kTwoPi / kOriBins;
  if (theta >= kTwoPi) theta -= kTwoPi;
  return theta;
}

Eigen::VectorXf sift_vector(const GrayImage& img, const Point& kp,
                            double scale, double theta) {
  const double width = 16.0 * (scale / 8.0);
  const double bin_width = width / kGridBins;
  const double half = width / 2.0;
  const double sigma = half;
  const double cos_t = std::cos(theta), sin_t = std::sin(theta);

  std::array<double, kGridBins * kGridBins * kAngleBins> acc{};
  const int reach = static_cast<int>(std::ceil(half * 1.4142135623730951)) + 1;
  const int cr = static_cast<int>(std::lround(kp.row));
  const int cc = static_cast<int>(std::lround(kp.col));
  for (int r = cr - reach; r <= cr + reach; ++r) {
    for (int c = cc - reach; c <= cc + reach; ++c) {
      const double dr = r - kp.row, dc = c - kp.col;
      // Keypoint-frame coordinates: the offset angle and the gradient angle
      // must both be measured relative to theta, so a global rotation of the
      // image cancels in both.
      const double u = cos_t * dr - sin_t * dc;
      const double v = sin_t * dr + cos_t * dc;
      const double rbin = u / bin_width + kGridBins / 2.0 - 0.5;
      const double cbin = v / bin_width + kGridBins / 2.0 - 0.5;
      if (rbin <= -1.0 || rbin >= kGridBins || cbin <= -1.0 || cbin >= kGridBins)
        continue;
      const Gradient g = gradient_at(img, r, c);
      if (!g.valid) continue;
      double rel = g.angle - theta;
      while (rel < 0.0) rel += kTwoPi;
      while (rel >= kTwoPi) rel -= kTwoPi;
      const double obin = rel * kAngleBins / kTwoPi;
      const double w = g.mag * std::exp(-(u * u + v * v) / (2.0 * sigma * sigma));

      const int r0 = static_cast<int>(std::floor(rbin));
      const int c0 = static_cast<int>(std::floor(cbin));
      const int o0 = static_cast<int>(std::floor(obin));
      const double fr = rbin - r0, fc = cbin - c0, fo = obin - o0;
      for (int ir = 0; ir < 2; ++ir) {
        const int rb = r0 + ir;
        if (rb < 0 || rb >= kGridBins) continue;
        const double wr = w * (ir == 0 ? 1.0 - fr : fr);
        for (int ic = 0; ic < 2; ++ic) {
          const int cb = c0 + ic;
          if (cb < 0 || cb >= kGridBins) continue;
          const double wc = wr * (ic == 0 ? 1.0 - fc : fc);
          for (int io = 0; io < 2; ++io) {
            const int ob = (o0 + io) % kAngleBins;
            const double wo = wc * (io == 0 ? 1.0 - fo : fo);
            acc[static_cast<std::size_t>((rb * kGridBins + cb) * kAngleBins + ob)] += wo;
          }
        }
      }
    }
  }

  Eigen::VectorXd vec(kGridBins * kGridBins * kAngleBins);
  for (int i = 0; i < vec.size(); ++i) vec(i) = acc[static_cast<std::size_t>(i)];
  const double n1 = vec.norm();
  if (n1 > 0.0) {
    vec /= n1;
    vec = vec.cwiseMin(0.2);
    const double n2 = vec.norm();
    if (n2 > 0.0) vec /= n2;
  }
  return vec.cast<float>();
}

}  // namespace

std::vector<Descriptor> sift_describe(const GrayImage& img,
                                      const std::vector<Point>& keypoints,
                                      double scale) {
  PK_CHECK(!img.empty(), ErrorKind::kInvalidArgument,
           "sift_describe requires a non-empty image");
  PK_CHECK(scale > 0.0, ErrorKind::kInvalidArgument,
           "sift scale must be positive");
  std::vector<Descriptor> out(keypoints.size());
  for (std::size_t k = 0; k < keypoints.size(); ++k) {
    Descriptor& d = out[k];
    d.keypoint = keypoints[k];
    bool support = false;
    const double theta = dominant_orientation(img, keypoints[k], scale, &support);
    if (!support) {
      d.v = Eigen::VectorXf::Zero(kGridBins * kGridBins * kAngleBins);
      d.empty_support = true;
      continue;
    }
    d.v = sift_vector(img, keypoints[k], scale, theta);
  }
  return out;
}

std::vector<Descriptor> dp_describe(const GrayImage& img,
                                    const std::vector<Point>& keypoints,
                                    int patch) {
  PK_CHECK(!img.empty(), ErrorKind::kInvalidArgument,
           "dp_describe requires a non-empty image");
  PK_CHECK(patch >= 2 && patch % 2 == 0, ErrorKind::kInvalidArgument,
           "dp patch size must be even and >= 2");
  std::vector<Descriptor> out(keypoints.size());
  for (std::size_t k = 0; k < keypoints.size(); ++k) {
    Descriptor& d = out[k];
    d.keypoint = keypoints[k];
    const GrayImage full = extract_patch(img, keypoints[k], patch + 1);
    Eigen::VectorXd vec(patch * patch);
    for (int r = 0; r < patch; ++r) {
      for (int c = 0; c < patch; ++c) {
        vec(r * patch + c) = full(r, c);
      }
    }
    vec.array() -= vec.mean();
    const double n = vec.norm();
    if (n > 0.0) vec /= n;
    d.v = vec.cast<float>();
  }
  return out;
}

}  // namespace porekit
