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

#ifndef POREKIT_DATASET_HPP_
#define POREKIT_DATASET_HPP_

#include <string>
#include <vector>

#include "porekit/detector.hpp"
#include "porekit/image.hpp"
#include "porekit/rng.hpp"
#include "porekit/synth.hpp"

namespace porekit {

struct ManifestEntry {
  std::string image_path;  // relative to the manifest root
  std::string gt_path;     // empty when no ground truth exists
  int subject = 0;
  int session = 0;
  int index = 0;
  std::string split;  // train | val | test | empty
};

struct DatasetManifest {
  std::string root;
  std::vector<ManifestEntry> entries;

  std::string image_file(const ManifestEntry& e) const;
  std::string gt_file(const ManifestEntry& e) const;
  std::vector<ManifestEntry> with_split(const std::string& split) const;
};

// Scans `root` according to the declared layout:
//  - "groundtruth": a flat directory of exactly 30 images (sorted by name)
//    with per-image ground-truth .txt files; splits assigned 15/5/10.
//  - "db": subject directories containing session directories containing
//    images; subjects without at least two sessions are excluded with a
//    warning.
//  - "synthetic": reads the manifest.csv a synthetic dataset writer emitted.
// Any other layout string is rejected. Duplicate (subject, session, index)
// triples or missing files raise data errors listing the offenders.
DatasetManifest ingest(const std::string& root, const std::string& layout,
                       std::vector<std::string>* warnings = nullptr);

void save_manifest_csv(const std::string& path, const DatasetManifest& manifest);
DatasetManifest load_manifest_csv(const std::string& path);

LabeledImage load_labeled_image(const DatasetManifest& manifest,
                                const ManifestEntry& entry);

// Writes `train+val+test` independent synthetic fingerprints with ground
// truth into `root` (groundtruth layout plus a manifest.csv with splits).
DatasetManifest write_detection_dataset(const std::string& root,
                                        const SynthConfig& cfg, int n_train,
                                        int n_val, int n_test, Rng& rng);

// Writes `subjects` synthetic subjects in the db layout (sessions are
// directories, sessions numbered from 1) plus manifest.csv and a
// transforms.csv recording every impression's true transform.
DatasetManifest write_recognition_dataset(const std::string& root,
                                          const SynthConfig& cfg, int subjects,
                                          Rng& rng);

}  // namespace porekit

#endif  // POREKIT_DATASET_HPP_
