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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <tuple>
#include <vector>

#include "porekit/detector.hpp"
#include "porekit/rng.hpp"
#include "porekit/synth.hpp"

using namespace porekit;

namespace {

// Quadratic greedy suppression with the same probability-then-position
// ordering, scored against closed integer-square IoU.
double box_iou_ref(const Detection& a, const Detection& b, int box) {
  const int half = box / 2;
  const int r0 = std::max(a.row, b.row) - half;
  const int r1 = std::min(a.row, b.row) + half;
  const int c0 = std::max(a.col, b.col) - half;
  const int c1 = std::min(a.col, b.col) + half;
  const int ih = std::max(0, r1 - r0 + 1);
  const int iw = std::max(0, c1 - c0 + 1);
  const double inter = static_cast<double>(ih) * iw;
  const double box_area = static_cast<double>(box) * box;
  return inter / (2.0 * box_area - inter);
}

std::vector<Detection> nms_oracle(std::vector<Detection> boxes, double iou_t,
                                  int box) {
  std::stable_sort(boxes.begin(), boxes.end(),
                   [](const Detection& a, const Detection& b) {
                     return std::tie(b.probability, a.row, a.col) <
                            std::tie(a.probability, b.row, b.col);
                   });
  std::vector<Detection> kept;
  for (const Detection& d : boxes) {
    bool suppressed = false;
    for (const Detection& k : kept) {
      if (box_iou_ref(d, k, box) > iou_t) suppressed = true;
    }
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

// Independent mutual-nearest scan using the documented tie ordering.
int tp_oracle(const std::vector<Point>& det, const std::vector<Point>& gt) {
  const auto closer = [](const Point& ref, const Point& x, int xi,
                         const Point& y, int yi) {
    return std::make_tuple(sq_dist(ref, x), x.row, x.col, xi) <
           std::make_tuple(sq_dist(ref, y), y.row, y.col, yi);
  };
  int tp = 0;
  for (std::size_t i = 0; i < det.size(); ++i) {
    for (std::size_t j = 0; j < gt.size(); ++j) {
      bool best_gt = true;
      for (std::size_t j2 = 0; j2 < gt.size(); ++j2) {
        if (j2 != j && closer(det[i], gt[j2], static_cast<int>(j2), gt[j],
                              static_cast<int>(j))) {
          best_gt = false;
        }
      }
      bool best_det = true;
      for (std::size_t i2 = 0; i2 < det.size(); ++i2) {
        if (i2 != i && closer(gt[j], det[i2], static_cast<int>(i2), det[i],
                              static_cast<int>(i))) {
          best_det = false;
        }
      }
      if (best_gt && best_det) ++tp;
    }
  }
  return tp;
}

std::vector<LabeledImage> synth_images(int n, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.rows = 96;
  cfg.cols = 96;
  std::vector<LabeledImage> out;
  for (int i = 0; i < n; ++i) {
    Rng rng(seed + static_cast<std::uint64_t>(i));
    SynthMaster master = gen_master(cfg, rng);
    out.push_back({std::move(master.image), std::move(master.pores)});
  }
  return out;
}

}  // namespace

TEST_CASE("the detection model has the published parameter counts") {
  Sequential<float> net = build_detector(0.5);
  CHECK(net.count_params(false) == 96548);
  CHECK(net.count_params(true) == 96098);
}

TEST_CASE("probability maps obey the shape law and patch equivalence") {
  Sequential<float> net = build_detector(0.5);
  Rng init(501);
  net.init_params(init);
  Rng rng(502);
  for (int trial = 0; trial < 4; ++trial) {
    const int rows = 17 + static_cast<int>(rng.uniform_int(80));
    const int cols = 17 + static_cast<int>(rng.uniform_int(80));
    GrayImage img(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c)
        img(r, c) = static_cast<float>(rng.uniform());
    const ProbabilityMap map = compute_probability_map(net, img);
    REQUIRE(map.values.rows() == rows - 16);
    REQUIRE(map.values.cols() == cols - 16);
    CHECK(map.margin == 8);

    for (int k = 0; k < 5; ++k) {
      const int r = static_cast<int>(rng.uniform_int(rows - 16));
      const int c = static_cast<int>(rng.uniform_int(cols - 16));
      TensorF patch({1, 17, 17, 1});
      for (int pr = 0; pr < 17; ++pr)
        for (int pc = 0; pc < 17; ++pc)
          patch[pr * 17 + pc] = img(r + pr, c + pc);
      const TensorF out = net.forward(patch, Mode::kInfer);
      REQUIRE(out.size() == 1);
      CHECK(std::abs(out[0] - map.values(r, c)) <= 1e-5f);
    }
  }
}

TEST_CASE("suppression matches the quadratic oracle") {
  Rng rng(503);
  for (int trial = 0; trial < 400; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(25));
    std::vector<Detection> boxes;
    for (int i = 0; i < n; ++i) {
      boxes.push_back({static_cast<int>(rng.uniform_int(18)),
                       static_cast<int>(rng.uniform_int(18)),
                       0.1 * (1 + static_cast<double>(rng.uniform_int(9)))});
    }
    const double iou_t = 0.1 * (1 + static_cast<double>(rng.uniform_int(8)));
    const auto got = nms(boxes, iou_t, 7);
    const auto want = nms_oracle(boxes, iou_t, 7);
    REQUIRE(got.size() == want.size());
    for (std::size_t k = 0; k < got.size(); ++k) {
      CHECK(got[k].row == want[k].row);
      CHECK(got[k].col == want[k].col);
      CHECK(got[k].probability == want[k].probability);
    }
  }
}

TEST_CASE("detection scoring matches the mutual-nearest oracle") {
  Rng rng(505);
  for (int trial = 0; trial < 300; ++trial) {
    const int nd = 1 + static_cast<int>(rng.uniform_int(20));
    const int ng = 1 + static_cast<int>(rng.uniform_int(20));
    std::vector<Point> det, gt;
    for (int i = 0; i < nd; ++i)
      det.push_back({static_cast<double>(rng.uniform_int(12)),
                     static_cast<double>(rng.uniform_int(12))});
    for (int j = 0; j < ng; ++j)
      gt.push_back({static_cast<double>(rng.uniform_int(12)),
                    static_cast<double>(rng.uniform_int(12))});
    const DetectionEvalReport rep = evaluate_detection(det, gt);
    const int want = tp_oracle(det, gt);
    CHECK(rep.true_positives == want);
    CHECK(rep.tdr == doctest::Approx(static_cast<double>(want) / ng));
    CHECK(rep.fdr == doctest::Approx(static_cast<double>(nd - want) / nd));
  }
}

TEST_CASE("perfect detections score perfectly") {
  std::vector<Point> gt{{3.0, 4.0}, {20.0, 30.0}, {50.0, 10.0}};
  const DetectionEvalReport rep = evaluate_detection(gt, gt);
  CHECK(rep.true_positives == 3);
  CHECK(rep.tdr == doctest::Approx(1.0));
  CHECK(rep.fdr == doctest::Approx(0.0));
  CHECK(rep.f_score == doctest::Approx(1.0));
  CHECK_FALSE(rep.degenerate);
}

TEST_CASE("an extra detection costs precision but not recall") {
  std::vector<Point> det{{0.0, 0.0}, {10.0, 10.0}, {20.0, 20.0}};
  std::vector<Point> gt{{0.0, 1.0}, {10.0, 11.0}};
  const DetectionEvalReport rep = evaluate_detection(det, gt);
  CHECK(rep.true_positives == 2);
  CHECK(rep.tdr == doctest::Approx(1.0));
  CHECK(rep.fdr == doctest::Approx(1.0 / 3.0));
  CHECK(rep.f_score == doctest::Approx(0.8));
}

TEST_CASE("empty inputs degenerate instead of failing") {
  const DetectionEvalReport rep = evaluate_detection({}, {{1.0, 1.0}});
  CHECK(rep.degenerate);
  CHECK(rep.true_positives == 0);
  CHECK(rep.tdr == doctest::Approx(0.0));
  CHECK(rep.f_score == doctest::Approx(0.0));
}

TEST_CASE("patch labels follow the closed box rule") {
  const std::vector<Point> gt{{0.0, 0.0}};
  CHECK(label_patch({3.0, 3.0}, gt) == 1.0f);
  CHECK(label_patch({4.0, 0.0}, gt) == 0.0f);
  CHECK(label_patch({0.0, 4.0}, gt) == 0.0f);
  CHECK(label_patch({-3.0, -3.0}, gt) == 1.0f);
  CHECK(label_patch({100.0, 100.0}, gt) == 0.0f);
  CHECK(label_patch({2.9, -2.9}, gt) == 1.0f);
  CHECK(label_patch({3.1, 0.0}, gt) == 0.0f);
}

TEST_CASE("training batches are balanced and deterministic") {
  const auto images = synth_images(3, 601);
  Rng a(602), b(602);
  const TrainingBatch ba =
      sample_training_batch(images, 128, AugmentationConfig::none(), a);
  const TrainingBatch bb =
      sample_training_batch(images, 128, AugmentationConfig::none(), b);
  REQUIRE(ba.patches.shape() == std::vector<int>{128, 17, 17, 1});
  REQUIRE(bb.labels.size() == 128);
  for (std::int64_t i = 0; i < ba.patches.size(); ++i)
    CHECK(ba.patches[i] == bb.patches[i]);
  double positives = 0.0;
  for (std::int64_t i = 0; i < ba.labels.size(); ++i) {
    CHECK((ba.labels[i] == 0.0f || ba.labels[i] == 1.0f));
    positives += ba.labels[i];
  }
  CHECK(positives >= 128 * 0.3);
  CHECK(positives <= 128 * 0.7);
}

TEST_CASE("thresholding is strict and monotone in the threshold") {
  ProbabilityMap map;
  map.rows = 28;
  map.cols = 28;
  map.margin = 8;
  map.values.resize(12, 12);
  map.values.setZero();
  map.values(0, 0) = 0.9f;
  map.values(0, 11) = 0.5f;
  map.values(11, 0) = 0.3f;
  map.values(11, 11) = 0.9f;

  DetectorConfig cfg;
  cfg.prob_threshold = 0.5;
  const auto at_half = detect_from_map(map, cfg);
  CHECK(at_half.size() == 2);
  for (const Detection& d : at_half) {
    CHECK(d.probability == doctest::Approx(0.9));
    CHECK(d.row >= 8);
    CHECK(d.col >= 8);
  }

  std::size_t last = std::numeric_limits<std::size_t>::max();
  for (double t : {0.1, 0.2, 0.4, 0.6, 0.8}) {
    cfg.prob_threshold = t;
    const std::size_t n = detect_from_map(map, cfg).size();
    CHECK(n <= last);
    last = n;
  }
}

TEST_CASE("smoke training reduces the loss on a small synthetic set") {
  const auto train = synth_images(4, 611);
  const auto val = synth_images(1, 621);
  DetectorTrainConfig cfg;
  cfg.batch_size = 64;
  cfg.max_steps = 200;
  cfg.eval_every = 100;
  cfg.patience = 10;
  Rng rng(612);
  DetectorTrainResult result = train_detector(train, val, cfg, rng);
  REQUIRE(static_cast<int>(result.step_losses.size()) == cfg.max_steps);
  const double first = result.step_losses.front();
  double tail = 0.0;
  for (int i = 0; i < 10; ++i)
    tail += result.step_losses[static_cast<std::size_t>(cfg.max_steps - 1 - i)];
  tail /= 10.0;
  CHECK(tail < first);
  CHECK(result.best_step > 0);
}

TEST_CASE("training runs are bit-identical under one seed") {
  const auto train = synth_images(2, 631);
  const auto val = synth_images(1, 641);
  DetectorTrainConfig cfg;
  cfg.batch_size = 32;
  cfg.max_steps = 12;
  cfg.eval_every = 6;
  Rng a(632), b(632);
  DetectorTrainResult ra = train_detector(train, val, cfg, a);
  DetectorTrainResult rb = train_detector(train, val, cfg, b);
  CHECK(ra.step_losses == rb.step_losses);
  CHECK(ra.val_fscores == rb.val_fscores);
  const auto pa = ra.model.param_refs();
  const auto pb = rb.model.param_refs();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    for (std::int64_t j = 0; j < pa[i].tensor->size(); ++j) {
      CHECK((*pa[i].tensor)[j] == (*pb[i].tensor)[j]);
    }
  }
}

TEST_CASE("detections and evaluation reports round-trip as text") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "porekit_detector_test";
  fs::create_directories(dir);

  std::vector<Detection> dets{{12, 30, 0.971}, {40, 5, 0.5}, {8, 8, 0.25}};
  const std::string path = (dir / "detections.txt").string();
  save_detections(path, dets);
  const std::vector<Detection> loaded = load_detections(path);
  REQUIRE(loaded.size() == dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) {
    CHECK(loaded[i].row == dets[i].row);
    CHECK(loaded[i].col == dets[i].col);
    CHECK(loaded[i].probability == doctest::Approx(dets[i].probability));
  }

  DetectionEvalReport rep;
  rep.true_positives = 5;
  rep.tdr = 0.5;
  rep.fdr = 0.25;
  rep.f_score = 0.6;
  const std::string rpath = (dir / "report.txt").string();
  save_eval_report(rpath, rep);
  const std::string text = format_eval_report(rep);
  CHECK(text.find("tp=5") != std::string::npos);
  CHECK(text.find("tdr=0.500000") != std::string::npos);
  CHECK(text.find("fdr=0.250000") != std::string::npos);
  CHECK(text.find("fscore=0.600000") != std::string::npos);
  CHECK(text.find("degenerate=0") != std::string::npos);
  std::ifstream in(rpath);
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == text);
  fs::remove_all(dir);
}
