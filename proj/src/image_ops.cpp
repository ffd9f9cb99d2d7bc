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

#include "porekit/image_ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace porekit {

float bilinear_sample(const GrayImage& img, double row, double col) {
  const int r0 = static_cast<int>(std::floor(row));
  const int c0 = static_cast<int>(std::floor(col));
  const double fr = row - r0, fc = col - c0;
  auto px = [&](int r, int c) -> double {
    return img.in_bounds(r, c) ? img(r, c) : 0.0;
  };
  const double v = (1.0 - fr) * ((1.0 - fc) * px(r0, c0) + fc * px(r0, c0 + 1)) +
                   fr * ((1.0 - fc) * px(r0 + 1, c0) + fc * px(r0 + 1, c0 + 1));
  return static_cast<float>(v);
}

GrayImage median_blur(const GrayImage& img, int kernel) {
  PK_CHECK(kernel >= 1 && kernel % 2 == 1, ErrorKind::kInvalidArgument,
           "median_blur kernel must be odd");
  const int M = img.rows(), N = img.cols(), half = kernel / 2;
  GrayImage out(M, N);
  std::vector<float> window(static_cast<std::size_t>(kernel) * kernel);
#pragma omp parallel for schedule(static) firstprivate(window)
  for (int r = 0; r < M; ++r) {
    for (int c = 0; c < N; ++c) {
      int k = 0;
      for (int dr = -half; dr <= half; ++dr) {
        const int rr = std::clamp(r + dr, 0, M - 1);
        for (int dc = -half; dc <= half; ++dc) {
          const int cc = std::clamp(c + dc, 0, N - 1);
          window[static_cast<std::size_t>(k++)] = img(rr, cc);
        }
      }
      auto mid = window.begin() + k / 2;
      std::nth_element(window.begin(), mid, window.begin() + k);
      out(r, c) = *mid;
    }
  }
  return out;
}

namespace {

inline int pixel_level(float v) {
  return std::clamp(static_cast<int>(std::lround(v * 255.0f)), 0, 255);
}

// Interpolation weight helper: for coordinate x between tile centers, find the
// bracketing tile indices and the blend factor, clamping beyond the outermost
// centers.
void tile_blend(const std::vector<double>& centers, double x, int& i0, int& i1,
                double& w1) {
  const int t = static_cast<int>(centers.size());
  if (x <= centers.front()) {
    i0 = i1 = 0;
    w1 = 0.0;
    return;
  }
  if (x >= centers.back()) {
    i0 = i1 = t - 1;
    w1 = 0.0;
    return;
  }
  int i = 0;
  while (i + 1 < t && centers[i + 1] <= x) ++i;
  i0 = i;
  i1 = i + 1;
  w1 = (x - centers[i0]) / (centers[i1] - centers[i0]);
}

}  // namespace

GrayImage clahe(const GrayImage& img, double clip_limit, int tiles_y,
                int tiles_x) {
  const int M = img.rows(), N = img.cols();
  PK_CHECK(tiles_y >= 1 && tiles_x >= 1, ErrorKind::kInvalidArgument,
           "clahe needs a positive tile grid");
  PK_CHECK(M >= tiles_y && N >= tiles_x, ErrorKind::kInvalidArgument,
           "clahe image smaller than the tile grid");
  PK_CHECK(clip_limit > 0.0, ErrorKind::kInvalidArgument,
           "clahe clip limit must be positive");

  // Per-tile lookup tables from clipped histograms.
  std::vector<std::array<float, 256>> luts(
      static_cast<std::size_t>(tiles_y) * tiles_x);
  std::vector<double> centers_y(tiles_y), centers_x(tiles_x);
  for (int ty = 0; ty < tiles_y; ++ty) {
    const int r0 = ty * M / tiles_y, r1 = (ty + 1) * M / tiles_y;
    centers_y[ty] = 0.5 * (r0 + r1 - 1);
    for (int tx = 0; tx < tiles_x; ++tx) {
      const int c0 = tx * N / tiles_x, c1 = (tx + 1) * N / tiles_x;
      if (ty == 0) centers_x[tx] = 0.5 * (c0 + c1 - 1);

      std::array<std::int64_t, 256> hist{};
      for (int r = r0; r < r1; ++r) {
        for (int c = c0; c < c1; ++c) ++hist[pixel_level(img(r, c))];
      }
      const std::int64_t n = static_cast<std::int64_t>(r1 - r0) * (c1 - c0);
      const std::int64_t clip = std::max<std::int64_t>(
          1, static_cast<std::int64_t>(clip_limit * n / 256.0));
      std::int64_t excess = 0;
      for (auto& h : hist) {
        if (h > clip) {
          excess += h - clip;
          h = clip;
        }
      }
      const std::int64_t batch = excess / 256, residual = excess % 256;
      for (int b = 0; b < 256; ++b) hist[b] += batch + (b < residual ? 1 : 0);

      std::int64_t cdf = 0;
      auto& lut = luts[static_cast<std::size_t>(ty) * tiles_x + tx];
      for (int b = 0; b < 256; ++b) {
        cdf += hist[b];
        lut[b] = static_cast<float>(
            std::clamp(std::lround(cdf * 255.0 / n), 0l, 255l));
      }
    }
  }

  GrayImage out(M, N);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < M; ++r) {
    int ty0, ty1;
    double wy;
    tile_blend(centers_y, r, ty0, ty1, wy);
    for (int c = 0; c < N; ++c) {
      int tx0, tx1;
      double wx;
      tile_blend(centers_x, c, tx0, tx1, wx);
      const int lvl = pixel_level(img(r, c));
      const double v00 = luts[static_cast<std::size_t>(ty0) * tiles_x + tx0][lvl];
      const double v01 = luts[static_cast<std::size_t>(ty0) * tiles_x + tx1][lvl];
      const double v10 = luts[static_cast<std::size_t>(ty1) * tiles_x + tx0][lvl];
      const double v11 = luts[static_cast<std::size_t>(ty1) * tiles_x + tx1][lvl];
      const double v = (1.0 - wy) * ((1.0 - wx) * v00 + wx * v01) +
                       wy * ((1.0 - wx) * v10 + wx * v11);
      out(r, c) = static_cast<float>(v / 255.0);
    }
  }
  return out;
}

GrayImage warp_rigid(const GrayImage& img, const RigidTransform& t) {
  const RigidTransform inv = t.inverse();
  GrayImage out(img.rows(), img.cols());
#pragma omp parallel for schedule(static)
  for (int r = 0; r < out.rows(); ++r) {
    for (int c = 0; c < out.cols(); ++c) {
      const Point src = inv.apply({static_cast<double>(r), static_cast<double>(c)});
      out(r, c) = bilinear_sample(img, src.row, src.col);
    }
  }
  return out;
}

GrayImage extract_patch(const GrayImage& img, const Point& center, int size) {
  PK_CHECK(size >= 1 && size % 2 == 1, ErrorKind::kInvalidArgument,
           "extract_patch size must be odd");
  const int half = size / 2;
  GrayImage patch(size, size);
  const double base_r = center.row - half, base_c = center.col - half;
  const bool integer_center = base_r == std::floor(base_r) &&
                              base_c == std::floor(base_c);
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      if (integer_center) {
        const int sr = static_cast<int>(base_r) + r;
        const int sc = static_cast<int>(base_c) + c;
        patch(r, c) = img.in_bounds(sr, sc) ? img(sr, sc) : 0.0f;
      } else {
        patch(r, c) = bilinear_sample(img, base_r + r, base_c + c);
      }
    }
  }
  return patch;
}

GrayImage augment_patch(const GrayImage& patch, const AugmentationConfig& cfg,
                        Rng& rng) {
  const double theta = rng.normal(0.0, cfg.sigma_rotation);
  const double dr = rng.normal(0.0, cfg.sigma_translation);
  const double dc = rng.normal(0.0, cfg.sigma_translation);
  const double brightness = rng.normal(0.0, cfg.sigma_brightness);
  const double contrast = 1.0 + rng.normal(0.0, cfg.sigma_contrast);

  GrayImage out = patch;
  if (theta != 0.0 || dr != 0.0 || dc != 0.0) {
    const double cr = (patch.rows() - 1) / 2.0, cc = (patch.cols() - 1) / 2.0;
    const double cos_t = std::cos(theta), sin_t = std::sin(theta);
    RigidTransform t;
    t.angle = theta;
    t.t_row = cr - (cos_t * cr - sin_t * cc) + dr;
    t.t_col = cc - (sin_t * cr + cos_t * cc) + dc;
    out = warp_rigid(out, t);
  }
  out.array() = (out.array() * static_cast<float>(contrast) +
                 static_cast<float>(brightness))
                    .cwiseMax(0.0f)
                    .cwiseMin(1.0f);
  return out;
}

GrayImage enhance_image(const GrayImage& img, int median_kernel,
                        double clahe_clip) {
  return clahe(median_blur(img, median_kernel), clahe_clip);
}

}  // namespace porekit
