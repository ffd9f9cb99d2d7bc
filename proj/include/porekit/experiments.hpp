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

#ifndef POREKIT_EXPERIMENTS_HPP_
#define POREKIT_EXPERIMENTS_HPP_

#include <string>
#include <vector>

#include "porekit/config.hpp"

namespace porekit {

// Every experiment is a pure function of its RunConfig: it materializes the
// config into the output directory and derives all randomness from the
// configured seed, so a rerun from that file reproduces the directory
// byte for byte.

struct DetectionExperimentResult {
  double best_prob_threshold = 0.0;
  double best_nms_iou = 0.0;
  double val_f = 0.0;
  double test_f = 0.0;
  int best_step = 0;
};

// Trains the detector on freshly written synthetic data, grid-searches the
// probability and NMS thresholds over {0.1, ..., 0.9}^2 on cached validation
// probability maps, and reports the test F-score at the best setting.
DetectionExperimentResult run_detection_experiment(const RunConfig& cfg,
                                                   const std::string& out_dir);

struct AlignmentPairResult {
  int pair = 0;
  bool failed = false;
  double true_angle = 0.0;
  double est_angle = 0.0;
  double theta_err = 0.0;   // radians
  double trans_err = 0.0;   // displacement of the image center, pixels
  double w_initial = 0.0;
  double w_final = 0.0;
  int iterations = 0;
};

struct AlignmentExperimentResult {
  std::vector<AlignmentPairResult> pairs;
  double median_theta_err = 0.0;
  double median_trans_err = 0.0;
  bool w_monotone = true;  // final w <= initial w in every successful run
  int failures = 0;
};

// Aligns synthetic impression pairs with known relative transforms. Each
// impression draws half the configured pair spread so the relative transform
// spans the full spread. A failed alignment counts as infinite error.
AlignmentExperimentResult run_alignment_experiment(const RunConfig& cfg,
                                                   const std::string& out_dir);

struct RecognitionExperimentResult {
  double eer_learned = 1.0;
  double eer_sift = 1.0;
  double eer_dp = 1.0;
  std::size_t genuine_pairs = 0;
  std::size_t impostor_pairs = 0;
  int annotation_labels = 0;
};

// The descriptor ablation: detector training on the training subjects'
// masters, cached pore detections for every impression, automatic identity
// annotation, descriptor training on a subject-disjoint split, then the
// session-crossed comparison protocol on the held-out subjects under the
// learned, sift, and dp backends — all three scoring the same detections.
RecognitionExperimentResult run_recognition_experiment(
    const RunConfig& cfg, const std::string& out_dir);

}  // namespace porekit

#endif  // POREKIT_EXPERIMENTS_HPP_
