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

#ifndef POREKIT_ALIGNER_HPP_
#define POREKIT_ALIGNER_HPP_

#include <string>
#include <vector>

#include "porekit/detector.hpp"
#include "porekit/image.hpp"
#include "porekit/matching.hpp"
#include "porekit/network.hpp"

namespace porekit {

struct AlignmentConfig {
  double lambda = 500.0;
  double epsilon = 1e-5;
  int max_iterations = 10;
  double sift_ratio = 0.8;
};

struct AlignmentState {
  int iteration = 0;
  RigidTransform transform;  // maps image-2 coordinates into image-1's frame
  double w = 0.0;            // mean squared residual of the correspondences
  double w_initial = 0.0;    // residual after the first (seed) estimate
  std::vector<Correspondence> correspondences;
};

// Pore patches with identity labels, the descriptor-training dataset.
struct AnnotatedPatchSet {
  std::vector<GrayImage> patches;  // 33x33 each
  std::vector<int> labels;
  std::vector<int> subjects;
  std::vector<int> source_images;

  int label_count() const;
};

struct IdentityDatasetConfig {
  AlignmentConfig align;
  DetectorConfig detect;
  int patch_size = 33;
  int median_kernel = 3;
  double clahe_clip = 3.0;
};

// Closed-form least-squares rigid transform with P[k] ~ T(Q[k]): centroid
// subtraction, rotation angle atan2 over centered cross/dot sums, translation
// from the centroids. Throws on < 2 pairs or a coincident configuration.
RigidTransform horn_align(const std::vector<Point>& p,
                          const std::vector<Point>& q);

// Combined metric for iterative re-matching: the descriptor distance plus the
// squared aligned-space distance weighted by lambda/(w + epsilon).
double combined_distance(double d_desc, const Point& p1, const Point& p2,
                         const RigidTransform& t, double w,
                         const AlignmentConfig& cfg);

// A point in image-1's frame is in the overlap iff it lies inside image 1 and
// its preimage under `t` (which maps image-2 coordinates into image 1) lies
// inside image 2.
bool in_overlap(const Point& p, int rows1, int cols1, const RigidTransform& t,
                int rows2, int cols2);

// Iterative alignment: SIFT matches seed a first transform; later iterations
// re-match under the combined metric restricted to the current overlap and
// re-solve, stopping on an unchanged correspondence set or after
// max_iterations. Inputs are enhanced images with their pore locations.
AlignmentState align_pair(const GrayImage& img1, const GrayImage& img2,
                          const std::vector<Point>& pores1,
                          const std::vector<Point>& pores2,
                          const AlignmentConfig& cfg);

// Automatic pore-identity annotation: detect pores, align every image of a
// subject to its first image, keep pores projecting into the overlap of all
// of the subject's images, give each a globally unique label, and cut a 33x33
// patch at the projected coordinate in every image (raw pixels, bilinear).
AnnotatedPatchSet build_identity_dataset(
    const std::vector<std::vector<GrayImage>>& subjects,
    const Sequential<float>& detector, const IdentityDatasetConfig& cfg,
    std::vector<std::string>* warnings = nullptr);

// Same, with pore locations supplied per subject per image.
AnnotatedPatchSet build_identity_dataset_from_pores(
    const std::vector<std::vector<GrayImage>>& subjects,
    const std::vector<std::vector<std::vector<Point>>>& pores,
    const IdentityDatasetConfig& cfg,
    std::vector<std::string>* warnings = nullptr);

// Container round trip (tensors "patches", "labels", "subjects",
// "source_images").
void save_patch_set(const std::string& path, const AnnotatedPatchSet& set);
AnnotatedPatchSet load_patch_set(const std::string& path);

}  // namespace porekit

#endif  // POREKIT_ALIGNER_HPP_
