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

#ifndef POREKIT_IMAGE_OPS_HPP_
#define POREKIT_IMAGE_OPS_HPP_

#include "porekit/image.hpp"
#include "porekit/rng.hpp"

namespace porekit {

// Bilinear sample at sub-pixel (row, col); zero outside the image.
float bilinear_sample(const GrayImage& img, double row, double col);

// Median filter with edge replication at the borders. Kernel must be odd.
GrayImage median_blur(const GrayImage& img, int kernel = 3);

// Contrast-limited adaptive histogram equalization: 256-bin tile histograms
// clipped at clip_limit times the mean bin count with uniform redistribution,
// bilinear interpolation between tile mappings.
GrayImage clahe(const GrayImage& img, double clip_limit = 3.0, int tiles_y = 8,
                int tiles_x = 8);

// output(p) = bilinear sample of img at T⁻¹(p); zero outside the source.
GrayImage warp_rigid(const GrayImage& img, const RigidTransform& t);

// size×size patch centered (odd size) at `center`; sub-pixel centers use
// bilinear sampling; zero outside the image.
GrayImage extract_patch(const GrayImage& img, const Point& center, int size);

// Per-patch random perturbation: rotation about the patch center and
// translation (bilinear, zero-padded), then brightness offset and contrast
// scaling with clamping to [0,1]. Each component is an independent normal
// draw; a zero sigma disables that component.
struct AugmentationConfig {
  double sigma_translation = 1.5;       // pixels per axis
  double sigma_rotation = 0.17453292519943295;  // radians (10 degrees)
  double sigma_brightness = 0.03;       // additive, full scale = 1
  double sigma_contrast = 0.05;         // multiplier is 1 + N(0, sigma)

  static AugmentationConfig none() { return {0.0, 0.0, 0.0, 0.0}; }
};

GrayImage augment_patch(const GrayImage& patch, const AugmentationConfig& cfg,
                        Rng& rng);

// Standard enhancement for the hand-crafted descriptor pipeline: median blur
// followed by CLAHE.
GrayImage enhance_image(const GrayImage& img, int median_kernel = 3,
                        double clahe_clip = 3.0);

}  // namespace porekit

#endif  // POREKIT_IMAGE_OPS_HPP_
