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

#include "porekit/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <tuple>

#include "porekit/common.hpp"
#include "porekit/losses.hpp"

namespace porekit {

namespace {

struct CenterRange {
  int r_lo, r_hi, c_lo, c_hi;
  bool empty() const { return r_lo > r_hi || c_lo > c_hi; }
};

// Integer patch centers that keep the patch inside the image and the pore
// inside the closed label box.
CenterRange positive_center_range(const Point& pore, int rows, int cols,
                                  int patch_size, int label_box) {
  const int half = patch_size / 2;
  const int reach = label_box / 2;
  CenterRange r;
  r.r_lo = std::max(half, static_cast<int>(std::ceil(pore.row - reach)));
  r.r_hi = std::min(rows - 1 - half, static_cast<int>(std::floor(pore.row + reach)));
  r.c_lo = std::max(half, static_cast<int>(std::ceil(pore.col - reach)));
  r.c_hi = std::min(cols - 1 - half, static_cast<int>(std::floor(pore.col + reach)));
  return r;
}

double box_iou(int r1, int c1, int r2, int c2, int box) {
  const int ir = std::max(0, box - std::abs(r1 - r2));
  const int ic = std::max(0, box - std::abs(c1 - c2));
  const double inter = static_cast<double>(ir) * ic;
  const double uni = 2.0 * box * box - inter;
  return inter / uni;
}

// Micro-averaged F-score of raw thresholded probability maps over a whole
// image set, used for early stopping.
double raw_map_fscore(const Sequential<float>& net,
                      const std::vector<LabeledImage>& images,
                      const DetectorConfig& cfg) {
  std::int64_t tp = 0, nd = 0, ng = 0;
  for (const LabeledImage& li : images) {
    const ProbabilityMap map = compute_probability_map(net, li.image);
    std::vector<Point> dets;
    for (int r = 0; r < map.values.rows(); ++r) {
      for (int c = 0; c < map.values.cols(); ++c) {
        if (map.values(r, c) > cfg.prob_threshold) {
          dets.push_back({static_cast<double>(r + map.margin),
                          static_cast<double>(c + map.margin)});
        }
      }
    }
    const DetectionEvalReport rep = evaluate_detection(dets, li.pores);
    tp += rep.true_positives;
    nd += static_cast<std::int64_t>(dets.size());
    ng += static_cast<std::int64_t>(li.pores.size());
  }
  if (nd == 0 || ng == 0) return 0.0;
  const double recall = static_cast<double>(tp) / static_cast<double>(ng);
  const double precision = static_cast<double>(tp) / static_cast<double>(nd);
  if (precision + recall <= 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace

Sequential<float> build_detector(double dropout_rate) {
  Sequential<float> net;
  net.conv(3, 3, 1, 32).relu().batchnorm(32).maxpool(3, 3)
      .conv(3, 3, 32, 64).relu().batchnorm(64).maxpool(3, 3)
      .conv(3, 3, 64, 128).relu().batchnorm(128).maxpool(3, 3)
      .dropout(dropout_rate)
      .conv(5, 5, 128, 1).batchnorm(1).sigmoid();
  return net;
}

float label_patch(const Point& center, const std::vector<Point>& gt,
                  int label_box) {
  const double reach = label_box / 2;
  for (const Point& g : gt) {
    if (std::abs(g.row - center.row) <= reach &&
        std::abs(g.col - center.col) <= reach) {
      return 1.0f;
    }
  }
  return 0.0f;
}

TrainingBatch sample_training_batch(const std::vector<LabeledImage>& images,
                                    int batch_size,
                                    const AugmentationConfig& aug, Rng& rng,
                                    int patch_size, int label_box) {
  PK_CHECK(batch_size >= 2, ErrorKind::kInvalidArgument,
           "batch_size must be >= 2");
  PK_CHECK(!images.empty(), ErrorKind::kInvalidData, "no training images");
  const int half = patch_size / 2;
  for (const LabeledImage& li : images) {
    PK_CHECK(li.image.rows() >= patch_size && li.image.cols() >= patch_size,
             ErrorKind::kInvalidData, "image smaller than a patch");
  }

  // Images that can produce at least one positive center.
  std::vector<int> positive_images;
  std::vector<std::vector<int>> usable_pores(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    const LabeledImage& li = images[i];
    for (std::size_t p = 0; p < li.pores.size(); ++p) {
      const CenterRange r = positive_center_range(
          li.pores[p], li.image.rows(), li.image.cols(), patch_size, label_box);
      if (!r.empty()) usable_pores[i].push_back(static_cast<int>(p));
    }
    if (!usable_pores[i].empty()) positive_images.push_back(static_cast<int>(i));
  }
  PK_CHECK(!positive_images.empty(), ErrorKind::kInvalidData,
           "no positive examples available in the training set");

  TrainingBatch batch;
  batch.patches = TensorF({batch_size, patch_size, patch_size, 1});
  batch.labels = TensorF({batch_size, 1, 1, 1});
  for (int b = 0; b < batch_size; ++b) {
    const bool want_positive = rng.uniform() < 0.5;
    int row = 0, col = 0;
    const LabeledImage* li = nullptr;
    if (want_positive) {
      const int img_idx = positive_images[static_cast<int>(
          rng.uniform_int(static_cast<std::uint64_t>(positive_images.size())))];
      li = &images[static_cast<std::size_t>(img_idx)];
      const auto& pores = usable_pores[static_cast<std::size_t>(img_idx)];
      const int pore_idx = pores[static_cast<int>(
          rng.uniform_int(static_cast<std::uint64_t>(pores.size())))];
      const CenterRange r = positive_center_range(
          li->pores[static_cast<std::size_t>(pore_idx)], li->image.rows(),
          li->image.cols(), patch_size, label_box);
      row = r.r_lo + static_cast<int>(rng.uniform_int(
                         static_cast<std::uint64_t>(r.r_hi - r.r_lo + 1)));
      col = r.c_lo + static_cast<int>(rng.uniform_int(
                         static_cast<std::uint64_t>(r.c_hi - r.c_lo + 1)));
    } else {
      bool found = false;
      for (int attempt = 0; attempt < 10000 && !found; ++attempt) {
        li = &images[static_cast<std::size_t>(
            rng.uniform_int(static_cast<std::uint64_t>(images.size())))];
        row = half + static_cast<int>(rng.uniform_int(
                         static_cast<std::uint64_t>(li->image.rows() - 2 * half)));
        col = half + static_cast<int>(rng.uniform_int(
                         static_cast<std::uint64_t>(li->image.cols() - 2 * half)));
        found = label_patch({static_cast<double>(row), static_cast<double>(col)},
                            li->pores, label_box) == 0.0f;
      }
      PK_CHECK(found, ErrorKind::kInvalidData,
               "could not sample a negative patch; pores cover the images");
    }
    const Point center{static_cast<double>(row), static_cast<double>(col)};
    const float label = label_patch(center, li->pores, label_box);
    GrayImage patch = extract_patch(li->image, center, patch_size);
    patch = augment_patch(patch, aug, rng);
    for (int r = 0; r < patch_size; ++r) {
      for (int c = 0; c < patch_size; ++c) {
        batch.patches.at(b, r, c, 0) = patch(r, c);
      }
    }
    batch.labels[b] = label;
  }
  return batch;
}

DetectorTrainResult train_detector(const std::vector<LabeledImage>& train,
                                   const std::vector<LabeledImage>& val,
                                   const DetectorTrainConfig& cfg, Rng& rng) {
  PK_CHECK(cfg.max_steps >= 1, ErrorKind::kInvalidArgument,
           "max_steps must be >= 1");
  PK_CHECK(!val.empty(), ErrorKind::kInvalidData, "no validation images");

  DetectorTrainResult result;
  result.model = build_detector(cfg.dropout);
  Rng init_rng = rng.fork("detector-init");
  Rng data_rng = rng.fork("detector-data");
  Rng drop_rng = rng.fork("detector-dropout");
  result.model.init_params(init_rng);

  Sequential<float>& net = result.model;
  OptimizerState opt{cfg.sgd, 0};
  Sequential<float> best = net;
  int evals_without_improvement = 0;
  bool any_eval = false;

  Tape<float> tape;
  for (int step = 0; step < cfg.max_steps; ++step) {
    TrainingBatch batch = sample_training_batch(
        train, cfg.batch_size, cfg.aug, data_rng, cfg.detect.patch_size,
        cfg.detect.label_box);
    const TensorF out =
        net.forward(batch.patches, Mode::kTrain, &drop_rng, &tape);
    const double loss = bce_loss(out, batch.labels);
    PK_CHECK(std::isfinite(loss), ErrorKind::kNumeric,
             "non-finite training loss at step " + std::to_string(step));
    result.step_losses.push_back(loss);

    net.zero_grads();
    net.backward(tape, bce_logit_grad(out, batch.labels),
                 static_cast<int>(net.layer_count()) - 2);
    auto refs = net.param_refs();
    sgd_step(refs, opt);

    if ((step + 1) % cfg.eval_every == 0) {
      const double f = raw_map_fscore(net, val, cfg.detect);
      result.val_fscores.emplace_back(step + 1, f);
      if (!any_eval || f > result.best_val_f) {
        any_eval = true;
        result.best_val_f = f;
        result.best_step = step + 1;
        best = net;
        evals_without_improvement = 0;
      } else if (++evals_without_improvement >= cfg.patience) {
        break;
      }
    }
  }

  if (any_eval) {
    result.model = best;
  } else {
    result.best_step = static_cast<int>(result.step_losses.size());
    result.best_val_f = raw_map_fscore(net, val, cfg.detect);
  }
  return result;
}

ProbabilityMap compute_probability_map(const Sequential<float>& model,
                                       const GrayImage& img) {
  const int patch = 17, margin = 8;
  PK_CHECK(img.rows() >= patch && img.cols() >= patch,
           ErrorKind::kInvalidArgument,
           "image smaller than the receptive field");
  ProbabilityMap map;
  map.rows = img.rows();
  map.cols = img.cols();
  map.margin = margin;
  const int out_rows = img.rows() - (patch - 1);
  const int out_cols = img.cols() - (patch - 1);
  map.values.resize(out_rows, out_cols);

  // Tiled inference bounds activation memory; valid convolutions make the
  // stitched result identical to a single full-image pass.
  const int tile = 184;
  for (int r0 = 0; r0 < out_rows; r0 += tile) {
    const int r1 = std::min(out_rows, r0 + tile);
    for (int c0 = 0; c0 < out_cols; c0 += tile) {
      const int c1 = std::min(out_cols, c0 + tile);
      const int in_rows = r1 - r0 + (patch - 1);
      const int in_cols = c1 - c0 + (patch - 1);
      TensorF input({1, in_rows, in_cols, 1});
      for (int r = 0; r < in_rows; ++r) {
        for (int c = 0; c < in_cols; ++c) {
          input.at(0, r, c, 0) = img(r0 + r, c0 + c);
        }
      }
      const TensorF out = model.forward(input, Mode::kInfer);
      PK_CHECK(out.dim(1) == r1 - r0 && out.dim(2) == c1 - c0,
               ErrorKind::kInvalidShape, "unexpected probability map shape");
      for (int r = r0; r < r1; ++r) {
        for (int c = c0; c < c1; ++c) {
          map.values(r, c) = out.at(0, r - r0, c - c0, 0);
        }
      }
    }
  }
  return map;
}

std::vector<Detection> nms(std::vector<Detection> boxes, double iou_threshold,
                           int box_size) {
  std::sort(boxes.begin(), boxes.end(),
            [](const Detection& a, const Detection& b) {
              return std::tie(b.probability, a.row, a.col) <
                     std::tie(a.probability, b.row, b.col);
            });
  std::vector<bool> suppressed(boxes.size(), false);
  std::vector<Detection> kept;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (suppressed[i]) continue;
    kept.push_back(boxes[i]);
    for (std::size_t j = i + 1; j < boxes.size(); ++j) {
      if (suppressed[j]) continue;
      if (box_iou(boxes[i].row, boxes[i].col, boxes[j].row, boxes[j].col,
                  box_size) > iou_threshold) {
        suppressed[j] = true;
      }
    }
  }
  return kept;
}

std::vector<Detection> detect_from_map(const ProbabilityMap& map,
                                       const DetectorConfig& cfg) {
  std::vector<Detection> candidates;
  for (int r = 0; r < map.values.rows(); ++r) {
    for (int c = 0; c < map.values.cols(); ++c) {
      if (map.values(r, c) > cfg.prob_threshold) {
        candidates.push_back(
            {r + map.margin, c + map.margin, map.values(r, c)});
      }
    }
  }
  return nms(std::move(candidates), cfg.nms_iou_threshold, cfg.box_size);
}

std::vector<Detection> detect_pores(const GrayImage& img,
                                    const Sequential<float>& model,
                                    const DetectorConfig& cfg) {
  return detect_from_map(compute_probability_map(model, img), cfg);
}

DetectionEvalReport evaluate_detection(const std::vector<Point>& detections,
                                       const std::vector<Point>& gt) {
  DetectionEvalReport rep;
  if (detections.empty() || gt.empty()) {
    rep.degenerate = true;
    return rep;
  }

  // Nearest-neighbor index with (distance, row, col, index) ordering so ties
  // resolve deterministically.
  const auto nearest = [](const Point& p, const std::vector<Point>& set) {
    int best = 0;
    double best_d = sq_dist(p, set[0]);
    for (int j = 1; j < static_cast<int>(set.size()); ++j) {
      const double d = sq_dist(p, set[static_cast<std::size_t>(j)]);
      const auto cand = std::make_tuple(d, set[static_cast<std::size_t>(j)].row,
                                        set[static_cast<std::size_t>(j)].col, j);
      const auto cur = std::make_tuple(best_d, set[static_cast<std::size_t>(best)].row,
                                       set[static_cast<std::size_t>(best)].col, best);
      if (cand < cur) {
        best = j;
        best_d = d;
      }
    }
    return best;
  };

  std::vector<int> nn_in_gt(detections.size());
  std::vector<int> nn_in_det(gt.size());
  for (std::size_t i = 0; i < detections.size(); ++i) {
    nn_in_gt[i] = nearest(detections[i], gt);
  }
  for (std::size_t j = 0; j < gt.size(); ++j) {
    nn_in_det[j] = nearest(gt[j], detections);
  }
  int tp = 0;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    if (nn_in_det[static_cast<std::size_t>(nn_in_gt[i])] ==
        static_cast<int>(i)) {
      ++tp;
    }
  }
  rep.true_positives = tp;
  rep.tdr = static_cast<double>(tp) / static_cast<double>(gt.size());
  rep.fdr = static_cast<double>(static_cast<int>(detections.size()) - tp) /
            static_cast<double>(detections.size());
  const double precision = 1.0 - rep.fdr;
  const double recall = rep.tdr;
  rep.f_score = precision + recall > 0.0
                    ? 2.0 * precision * recall / (precision + recall)
                    : 0.0;
  return rep;
}

std::vector<Point> detection_centers(const std::vector<Detection>& dets) {
  std::vector<Point> pts;
  pts.reserve(dets.size());
  for (const Detection& d : dets) {
    pts.push_back({static_cast<double>(d.row), static_cast<double>(d.col)});
  }
  return pts;
}

void save_detections(const std::string& path,
                     const std::vector<Detection>& dets) {
  std::ofstream out(path);
  PK_CHECK(out.good(), ErrorKind::kFormat, "cannot open for write: " + path);
  char line[96];
  for (const Detection& d : dets) {
    std::snprintf(line, sizeof(line), "%d %d %.9g\n", d.row, d.col,
                  d.probability);
    out << line;
  }
  PK_CHECK(out.good(), ErrorKind::kFormat, "write failed: " + path);
}

std::vector<Detection> load_detections(const std::string& path) {
  std::ifstream in(path);
  PK_CHECK(in.good(), ErrorKind::kFormat, "cannot open: " + path);
  std::vector<Detection> dets;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream is(line);
    Detection d;
    is >> d.row >> d.col >> d.probability;
    PK_CHECK(!is.fail(), ErrorKind::kFormat,
             "bad detection line " + std::to_string(line_no) + " in " + path);
    dets.push_back(d);
  }
  return dets;
}

std::string format_eval_report(const DetectionEvalReport& report) {
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "tp=%d\ntdr=%.6f\nfdr=%.6f\nfscore=%.6f\ndegenerate=%d\n",
                report.true_positives, report.tdr, report.fdr, report.f_score,
                report.degenerate ? 1 : 0);
  return std::string(buf);
}

void save_eval_report(const std::string& path,
                      const DetectionEvalReport& report) {
  std::ofstream out(path);
  PK_CHECK(out.good(), ErrorKind::kFormat, "cannot open for write: " + path);
  out << format_eval_report(report);
  PK_CHECK(out.good(), ErrorKind::kFormat, "write failed: " + path);
}

}  // namespace porekit
