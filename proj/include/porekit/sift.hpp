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

#ifndef POREKIT_SIFT_HPP_
#define POREKIT_SIFT_HPP_

#include <vector>

#include "porekit/image.hpp"
#include "porekit/matching.hpp"

namespace porekit {

// Fixed-scale SIFT descriptors at the given keypoints. The scale is the
// keypoint diameter in pixels: the dominant orientation comes from a 36-bin
// gradient histogram weighted with a Gaussian of sigma 1.5*scale, and the
// 128-d descriptor covers a 16*(scale/8)-pixel square grid rotated to that
// orientation, normalized with the usual 0.2 clamp and renormalization.
// Keypoints whose support lies entirely outside the image produce a zero
// descriptor with empty_support set. The image is expected to be enhanced
// (median blur + CLAHE) by the caller.
std::vector<Descriptor> sift_describe(const GrayImage& img,
                                      const std::vector<Point>& keypoints,
                                      double scale = 8.0);

// Direct-pixel baseline descriptor: the (patch+1)x(patch+1) neighborhood with
// its last row and column discarded, flattened, mean-subtracted, and
// l2-normalized (zero-safe).
std::vector<Descriptor> dp_describe(const GrayImage& img,
                                    const std::vector<Point>& keypoints,
                                    int patch = 32);

}  // namespace porekit

#endif  // POREKIT_SIFT_HPP_
