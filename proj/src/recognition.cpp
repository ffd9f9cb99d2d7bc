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

#include "porekit/recognition.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>

#include "porekit/common.hpp"

namespace porekit {

int match_fingerprints(const std::vector<Descriptor>& d1,
                       const std::vector<Descriptor>& d2, double ratio) {
  if (!d1.empty() && !d2.empty()) {
    PK_CHECK(d1.front().v.size() == d2.front().v.size(),
             ErrorKind::kInvalidArgument,
             "descriptor dimensions differ between the two images");
  }
  return static_cast<int>(match_ratio_mutual(d1, d2, ratio).size());
}

ProtocolPairs gen_protocol(const std::vector<ImageKey>& images,
                           std::vector<std::string>* warnings) {
  // subject -> session -> sorted image indices
  std::map<int, std::map<int, std::vector<int>>> by_subject;
  for (std::size_t i = 0; i < images.size(); ++i) {
    by_subject[images[i].subject][images[i].session].push_back(
        static_cast<int>(i));
  }
  for (auto& [subject, sessions] : by_subject) {
    for (auto& [session, idx] : sessions) {
      std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        return images[static_cast<std::size_t>(a)].index <
               images[static_cast<std::size_t>(b)].index;
      });
    }
  }

  std::vector<int> usable;
  for (const auto& [subject, sessions] : by_subject) {
    if (sessions.size() < 2) {
      if (warnings != nullptr) {
        warnings->push_back("subject " + std::to_string(subject) +
                            " has a single session, excluded");
      }
      continue;
    }
    usable.push_back(subject);
  }

  ProtocolPairs pairs;
  for (int subject : usable) {
    const auto& sessions = by_subject[subject];
    auto it = sessions.begin();
    const std::vector<int>& first = it->second;
    const std::vector<int>& second = std::next(it)->second;
    for (int a : first) {
      for (int b : second) {
        pairs.genuine.emplace_back(a, b);
      }
    }
  }
  for (int s1 : usable) {
    for (int s2 : usable) {
      if (s1 == s2) continue;
      const auto& sess1 = by_subject[s1];
      const auto& sess2 = by_subject[s2];
      pairs.impostor.emplace_back(sess1.begin()->second.front(),
                                  std::next(sess2.begin())->second.front());
    }
  }
  return pairs;
}

RocCurve roc_eer(const std::vector<double>& genuine_scores,
                 const std::vector<double>& impostor_scores) {
  PK_CHECK(!genuine_scores.empty() && !impostor_scores.empty(),
           ErrorKind::kInvalidArgument,
           "roc_eer needs non-empty genuine and impostor score lists");

  std::vector<double> thresholds;
  thresholds.reserve(genuine_scores.size() + impostor_scores.size() + 2);
  thresholds.insert(thresholds.end(), genuine_scores.begin(),
                    genuine_scores.end());
  thresholds.insert(thresholds.end(), impostor_scores.begin(),
                    impostor_scores.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());
  thresholds.insert(thresholds.begin(), thresholds.front() - 1.0);
  thresholds.push_back(thresholds.back() + 1.0);

  RocCurve roc;
  const double ng = static_cast<double>(genuine_scores.size());
  const double ni = static_cast<double>(impostor_scores.size());
  for (double t : thresholds) {
    RocPoint pt;
    pt.threshold = t;
    std::size_t accepts = 0, rejects = 0;
    for (double s : impostor_scores) {
      if (s >= t) ++accepts;
    }
    for (double s : genuine_scores) {
      if (s < t) ++rejects;
    }
    pt.far = static_cast<double>(accepts) / ni;
    pt.frr = static_cast<double>(rejects) / ng;
    roc.points.push_back(pt);
  }

  // Walk the sweep to the first point where FAR <= FRR; interpolate linearly
  // from the previous point. The interpolation weight depends only on the
  // FAR/FRR values, so the EER is invariant under strictly increasing score
  // transforms.
  roc.eer = 0.5;
  for (std::size_t k = 0; k < roc.points.size(); ++k) {
    const double diff = roc.points[k].far - roc.points[k].frr;
    if (diff > 0.0) continue;
    if (diff == 0.0 || k == 0) {
      roc.eer = roc.points[k].far;
    } else {
      const RocPoint& a = roc.points[k - 1];
      const RocPoint& b = roc.points[k];
      const double gap = (a.far - a.frr) + (b.frr - b.far);
      const double u = gap > 0.0 ? (a.far - a.frr) / gap : 0.0;
      roc.eer = a.far + u * (b.far - a.far);
    }
    break;
  }
  return roc;
}

void save_scores_csv(const std::string& path,
                     const std::vector<ScoredPair>& scores) {
  std::ofstream out(path);
  PK_CHECK(out.good(), ErrorKind::kFormat, "cannot open for write: " + path);
  out << "id_a,id_b,label,score\n";
  char buf[64];
  for (const ScoredPair& s : scores) {
    std::snprintf(buf, sizeof(buf), "%.9g", s.score);
    out << s.id_a << ',' << s.id_b << ','
        << (s.genuine ? "genuine" : "impostor") << ',' << buf << '\n';
  }
  PK_CHECK(out.good(), ErrorKind::kFormat, "write failed: " + path);
}

void save_roc_csv(const std::string& path, const RocCurve& roc) {
  std::ofstream out(path);
  PK_CHECK(out.good(), ErrorKind::kFormat, "cannot open for write: " + path);
  out << "threshold,far,frr\n";
  char buf[128];
  for (const RocPoint& pt : roc.points) {
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g\n", pt.threshold, pt.far,
                  pt.frr);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "eer,%.9g\n", roc.eer);
  out << buf;
  PK_CHECK(out.good(), ErrorKind::kFormat, "write failed: " + path);
}

}  // namespace porekit
