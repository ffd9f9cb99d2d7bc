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

#ifndef POREKIT_DETECTOR_HPP_
#define POREKIT_DETECTOR_HPP_

#include <string>
#include <utility>
#include <vector>

#include "porekit/image.hpp"
#include "porekit/image_ops.hpp"
#include "porekit/network.hpp"
#include "porekit/optimizer.hpp"
#include "porekit/rng.hpp"

namespace porekit {

// An image paired with its pore ground truth (0-indexed row/col centers).
struct LabeledImage {
  GrayImage image;
  std::vector<Point> pores;
};

struct DetectorConfig {
  double prob_threshold = 0.9;
  double nms_iou_threshold = 0.1;
  int box_size = 7;
  int patch_size = 17;
  int label_box = 7;
};

// Per-site pore probabilities for a full image. `values` covers the interior
// where a full receptive field exists; `padded` views it as the full image
// with a zero frame of `margin` pixels on every side.
struct ProbabilityMap {
  Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> values;
  int rows = 0;
  int cols = 0;
  int margin = 8;

  float padded(int r, int c) const {
    const int ir = r - margin, ic = c - margin;
    if (ir < 0 || ic < 0 || ir >= values.rows() || ic >= values.cols())
      return 0.0f;
    return values(ir, ic);
  }
};

// A detected pore: integer center with its 7x7 box implied.
struct Detection {
  int row = 0;
  int col = 0;
  double probability = 0.0;
};

struct DetectionEvalReport {
  int true_positives = 0;
  double tdr = 0.0;
  double fdr = 0.0;
  double f_score = 0.0;
  bool degenerate = false;
};

struct DetectorTrainConfig {
  SgdConfig sgd;  // defaults: lr 0.1, decay 0.96 / 2000 steps, no weight decay
  int batch_size = 256;
  double dropout = 0.5;
  int max_steps = 20000;
  int eval_every = 500;
  int patience = 10;
  AugmentationConfig aug;
  DetectorConfig detect;
};

struct DetectorTrainResult {
  Sequential<float> model;
  std::vector<double> step_losses;
  std::vector<std::pair<int, double>> val_fscores;
  int best_step = 0;
  double best_val_f = 0.0;
};

struct TrainingBatch {
  TensorF patches;  // [B,17,17,1]
  TensorF labels;   // [B,1,1,1]
};

// The detection stack: three conv3x3+relu+bn+maxpool3x3 blocks (32/64/128
// filters), dropout, then conv5x5/1+bn+sigmoid. All valid padding, stride 1,
// so an MxN input yields an (M-16)x(N-16) map. Weights are left at zero;
// call init_params before training.
Sequential<float> build_detector(double dropout_rate = 0.5);

// 1 iff any ground-truth pore lies in the closed label_box x label_box square
// centered at `center`.
float label_patch(const Point& center, const std::vector<Point>& gt,
                  int label_box = 7);

// Independent random patches, roughly half sampled inside label boxes
// (positives) and half elsewhere, each augmented once; labels are those of
// the un-augmented crop.
TrainingBatch sample_training_batch(const std::vector<LabeledImage>& images,
                                    int batch_size,
                                    const AugmentationConfig& aug, Rng& rng,
                                    int patch_size = 17, int label_box = 7);

// Cross-entropy training with early stopping on validation F-score computed
// from the raw thresholded probability map (no NMS). Returns the
// best-validation parameters together with the full loss/score log.
DetectorTrainResult train_detector(const std::vector<LabeledImage>& train,
                                   const std::vector<LabeledImage>& val,
                                   const DetectorTrainConfig& cfg, Rng& rng);

ProbabilityMap compute_probability_map(const Sequential<float>& model,
                                       const GrayImage& img);

// Greedy non-maximum suppression over 7x7 boxes; IoU computed on closed
// integer squares. Ties in probability are broken by (row, col) order.
std::vector<Detection> nms(std::vector<Detection> boxes, double iou_threshold,
                           int box_size = 7);

// Threshold (strict >) + NMS over the probability map; results sorted by
// probability descending.
std::vector<Detection> detect_from_map(const ProbabilityMap& map,
                                       const DetectorConfig& cfg);

std::vector<Detection> detect_pores(const GrayImage& img,
                                    const Sequential<float>& model,
                                    const DetectorConfig& cfg);

// Mutual-nearest-neighbor detection scoring. Empty D or G yields zero rates
// with the degenerate flag set.
DetectionEvalReport evaluate_detection(const std::vector<Point>& detections,
                                       const std::vector<Point>& gt);

std::vector<Point> detection_centers(const std::vector<Detection>& dets);

// Text round trip: one "row col probability" line per detection, 0-indexed.
void save_detections(const std::string& path,
                     const std::vector<Detection>& dets);
std::vector<Detection> load_detections(const std::string& path);

std::string format_eval_report(const DetectionEvalReport& report);
void save_eval_report(const std::string& path,
                      const DetectionEvalReport& report);

}  // namespace porekit

#endif  // POREKIT_DETECTOR_HPP_
