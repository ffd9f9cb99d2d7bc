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

#ifndef POREKIT_RECOGNITION_HPP_
#define POREKIT_RECOGNITION_HPP_

#include <string>
#include <utility>
#include <vector>

#include "porekit/matching.hpp"

namespace porekit {

// Identifies one dataset image inside the comparison protocol.
struct ImageKey {
  int subject = 0;
  int session = 0;
  int index = 0;
};

struct ProtocolPairs {
  std::vector<std::pair<int, int>> genuine;   // indices into the key list
  std::vector<std::pair<int, int>> impostor;
};

struct RocPoint {
  double threshold = 0.0;
  double far = 0.0;
  double frr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;
  double eer = 0.0;
};

// Recognition score: the number of mutual ratio-test correspondences.
int match_fingerprints(const std::vector<Descriptor>& d1,
                       const std::vector<Descriptor>& d2, double ratio = 0.7);

// Session-1 x session-2 comparison pairs: genuine pairs cross sessions within
// a subject; impostor pairs take the first session-1 image of each subject
// against the first session-2 image of every other subject (ordered).
// Subjects lacking two sessions are excluded with a warning.
ProtocolPairs gen_protocol(const std::vector<ImageKey>& images,
                           std::vector<std::string>* warnings = nullptr);

// FAR/FRR sweep over the observed scores (accept when score >= threshold)
// with sentinels outside the range; the EER comes from linear interpolation
// at the FAR = FRR crossing.
RocCurve roc_eer(const std::vector<double>& genuine_scores,
                 const std::vector<double>& impostor_scores);

struct ScoredPair {
  std::string id_a;
  std::string id_b;
  bool genuine = false;
  double score = 0.0;
};

// CSV "id_a,id_b,label{genuine|impostor},score".
void save_scores_csv(const std::string& path,
                     const std::vector<ScoredPair>& scores);

// CSV "threshold,far,frr" rows plus a trailing "eer,<value>" line.
void save_roc_csv(const std::string& path, const RocCurve& roc);

}  // namespace porekit

#endif  // POREKIT_RECOGNITION_HPP_
