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

#ifndef POREKIT_MATCHING_HPP_
#define POREKIT_MATCHING_HPP_

#include <vector>

#include <Eigen/Dense>

#include "porekit/image.hpp"

namespace porekit {

// Fixed-length feature vector attached to an image location. `empty_support`
// marks descriptors whose footprint fell entirely outside the image.
struct Descriptor {
  Eigen::VectorXf v;
  Point keypoint;
  bool empty_support = false;
};

struct Correspondence {
  int index_a = -1;
  int index_b = -1;
  double distance = 0.0;
};

// One-to-one matching under an arbitrary precomputed distance matrix
// (rows = set A, cols = set B): (a,b) is accepted iff they are mutual nearest
// neighbors and the best distance is strictly below ratio times the
// second-best distance in BOTH directions. Nearest-neighbor ties go to the
// lower index. Either set having fewer than two elements yields an empty,
// degenerate result.
std::vector<Correspondence> match_from_distances(const Eigen::MatrixXd& dist,
                                                 double ratio,
                                                 bool* degenerate = nullptr);

// Euclidean pairwise distances between descriptor sets.
Eigen::MatrixXd descriptor_distances(const std::vector<Descriptor>& a,
                                     const std::vector<Descriptor>& b);

std::vector<Correspondence> match_ratio_mutual(const std::vector<Descriptor>& a,
                                               const std::vector<Descriptor>& b,
                                               double ratio,
                                               bool* degenerate = nullptr);

}  // namespace porekit

#endif  // POREKIT_MATCHING_HPP_
