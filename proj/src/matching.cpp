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

#include "porekit/matching.hpp"

#include <cmath>

#include "porekit/common.hpp"

namespace porekit {

namespace {

// Index of the row minimum plus the smallest value over the remaining
// entries. Ties on the minimum go to the lower index.
struct BestTwo {
  int best_index = -1;
  double best = 0.0;
  double second = 0.0;
};

template <typename Vec>
BestTwo best_two(const Vec& row) {
  BestTwo out;
  out.best_index = 0;
  out.best = row(0);
  for (int j = 1; j < static_cast<int>(row.size()); ++j) {
    if (row(j) < out.best) {
      out.best = row(j);
      out.best_index = j;
    }
  }
  bool seeded = false;
  for (int j = 0; j < static_cast<int>(row.size()); ++j) {
    if (j == out.best_index) continue;
    if (!seeded || row(j) < out.second) {
      out.second = row(j);
      seeded = true;
    }
  }
  return out;
}

}  // namespace

std::vector<Correspondence> match_from_distances(const Eigen::MatrixXd& dist,
                                                 double ratio,
                                                 bool* degenerate) {
  PK_CHECK(ratio > 0.0 && ratio <= 1.0, ErrorKind::kInvalidArgument,
           "match ratio must lie in (0, 1]");
  const int na = static_cast<int>(dist.rows());
  const int nb = static_cast<int>(dist.cols());
  if (degenerate != nullptr) *degenerate = false;
  if (na < 2 || nb < 2) {
    if (degenerate != nullptr) *degenerate = true;
    return {};
  }

  std::vector<BestTwo> by_row(na);
  std::vector<BestTwo> by_col(nb);
  for (int i = 0; i < na; ++i) by_row[i] = best_two(dist.row(i));
  for (int j = 0; j < nb; ++j) by_col[j] = best_two(dist.col(j));

  std::vector<Correspondence> out;
  for (int i = 0; i < na; ++i) {
    const int j = by_row[i].best_index;
    if (by_col[j].best_index != i) continue;
    if (!(by_row[i].best < ratio * by_row[i].second)) continue;
    if (!(by_col[j].best < ratio * by_col[j].second)) continue;
    out.push_back({i, j, by_row[i].best});
  }
  return out;
}

Eigen::MatrixXd descriptor_distances(const std::vector<Descriptor>& a,
                                     const std::vector<Descriptor>& b) {
  Eigen::MatrixXd dist(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      PK_CHECK(a[i].v.size() == b[j].v.size(), ErrorKind::kInvalidShape,
               "descriptor dimensions differ");
      dist(i, j) =
          (a[i].v.cast<double>() - b[j].v.cast<double>()).norm();
    }
  }
  return dist;
}

std::vector<Correspondence> match_ratio_mutual(const std::vector<Descriptor>& a,
                                               const std::vector<Descriptor>& b,
                                               double ratio,
                                               bool* degenerate) {
  if (a.size() < 2 || b.size() < 2) {
    PK_CHECK(ratio > 0.0 && ratio <= 1.0, ErrorKind::kInvalidArgument,
             "match ratio must lie in (0, 1]");
    if (degenerate != nullptr) *degenerate = true;
    return {};
  }
  return match_from_distances(descriptor_distances(a, b), ratio, degenerate);
}

}  // namespace porekit
