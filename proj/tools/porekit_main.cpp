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

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "porekit/aligner.hpp"
#include "porekit/common.hpp"
#include "porekit/config.hpp"
#include "porekit/dataset.hpp"
#include "porekit/descnet.hpp"
#include "porekit/detector.hpp"
#include "porekit/experiments.hpp"
#include "porekit/grad_check.hpp"
#include "porekit/image_io.hpp"
#include "porekit/losses.hpp"
#include "porekit/model_io.hpp"
#include "porekit/recognition.hpp"
#include "porekit/sift.hpp"

namespace fs = std::filesystem;

namespace {

using namespace porekit;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
      return 1;
    case ErrorKind::kInvalidShape:
    case ErrorKind::kInvalidData:
    case ErrorKind::kFormat:
      return 2;
    case ErrorKind::kNumeric:
      return 3;
  }
  return 3;
}

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

RunConfig make_config(const CommonOpts& opts) {
  RunConfig cfg = opts.config_path.empty() ? RunConfig::defaults()
                                           : load_run_config(opts.config_path);
  for (const std::string& kv : opts.sets) {
    const auto eq = kv.find('=');
    PK_CHECK(eq != std::string::npos, ErrorKind::kInvalidArgument,
             "--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (opts.seed_given) cfg.set_u64("seed", opts.seed);
  return cfg;
}

Sequential<float> load_detector_model(const std::string& path,
                                      const RunConfig& cfg) {
  const Container c = load_container(path);
  const std::string arch = c.meta("architecture", "pore-detector");
  PK_CHECK(arch == "pore-detector", ErrorKind::kInvalidData,
           path + ": expected a pore-detector model, found '" + arch + "'");
  Sequential<float> net = build_detector(cfg.get_double("detector.dropout"));
  load_model_params(net, c);
  return net;
}

Sequential<float> load_descriptor_model(const std::string& path,
                                        const RunConfig& cfg) {
  const Container c = load_container(path);
  const std::string arch = c.meta("architecture", "pore-descriptor");
  PK_CHECK(arch == "pore-descriptor", ErrorKind::kInvalidData,
           path + ": expected a pore-descriptor model, found '" + arch + "'");
  Sequential<float> net = build_descnet(cfg.get_double("descnet.dropout"));
  load_model_params(net, c);
  return net;
}

// Manifest entries grouped by subject, each subject's images ordered by
// (session, index).
std::map<int, std::vector<ManifestEntry>> group_by_subject(
    const DatasetManifest& manifest) {
  std::map<int, std::vector<ManifestEntry>> groups;
  for (const ManifestEntry& e : manifest.entries) groups[e.subject].push_back(e);
  for (auto& [subject, entries] : groups) {
    std::sort(entries.begin(), entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) {
                return std::tie(a.session, a.index) <
                       std::tie(b.session, b.index);
              });
  }
  return groups;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
}

int cmd_synth(const RunConfig& cfg, const std::string& out,
              const std::string& kind, int n_train, int n_val, int n_test,
              int subjects) {
  Rng rng(cfg.get_u64("seed"));
  fs::create_directories(out);
  save_run_config((fs::path(out) / "config.txt").string(), cfg);
  if (kind == "detection") {
    Rng data_rng = rng.fork("detection-data");
    const DatasetManifest m = write_detection_dataset(
        out, synth_config(cfg), n_train, n_val, n_test, data_rng);
    std::cout << "images=" << m.entries.size() << "\n";
  } else {
    Rng data_rng = rng.fork("recognition-data");
    const DatasetManifest m =
        write_recognition_dataset(out, synth_config(cfg), subjects, data_rng);
    std::cout << "images=" << m.entries.size() << "\n";
  }
  return 0;
}

int cmd_train_detector(const RunConfig& cfg, const std::string& data,
                       const std::string& layout, const std::string& model) {
  std::vector<std::string> warnings;
  const DatasetManifest manifest = ingest(data, layout, &warnings);
  print_warnings(warnings);
  std::vector<LabeledImage> train, val;
  for (const ManifestEntry& e : manifest.with_split("train"))
    train.push_back(load_labeled_image(manifest, e));
  for (const ManifestEntry& e : manifest.with_split("val"))
    val.push_back(load_labeled_image(manifest, e));
  PK_CHECK(!train.empty() && !val.empty(), ErrorKind::kInvalidData,
           "dataset has no train/val split");
  Rng rng(cfg.get_u64("seed"));
  Rng train_rng = rng.fork("detection-train");
  DetectorTrainResult result =
      train_detector(train, val, detector_train_config(cfg), train_rng);
  save_model(result.model,
             {{"architecture", "pore-detector"},
              {"seed", cfg.raw("seed")},
              {"steps", std::to_string(result.best_step)},
              {"lr", cfg.raw("detector.lr")},
              {"batch_size", cfg.raw("detector.batch_size")}},
             model);
  std::cout << "best_step=" << result.best_step << "\n"
            << "best_val_f=" << format_double(result.best_val_f) << "\n";
  return 0;
}

int cmd_detect(const RunConfig& cfg, const std::string& model,
               const std::string& image, const std::string& out) {
  const Sequential<float> net = load_detector_model(model, cfg);
  const std::vector<Detection> dets =
      detect_pores(load_image(image), net, detector_config(cfg));
  if (out.empty()) {
    for (const Detection& d : dets) {
      std::cout << d.row << " " << d.col << " " << format_double(d.probability)
                << "\n";
    }
  } else {
    save_detections(out, dets);
  }
  std::cerr << "detections=" << dets.size() << "\n";
  return 0;
}

int cmd_eval_detect(const std::string& detections, const std::string& truth,
                    const std::string& out) {
  const DetectionEvalReport report = evaluate_detection(
      detection_centers(load_detections(detections)), load_ground_truth(truth));
  std::cout << format_eval_report(report);
  if (!out.empty()) save_eval_report(out, report);
  return 0;
}

int cmd_align(const RunConfig& cfg, const std::string& image1,
              const std::string& image2, const std::string& pores1_path,
              const std::string& pores2_path, const std::string& model) {
  const GrayImage img1 = load_image(image1);
  const GrayImage img2 = load_image(image2);
  std::vector<Point> pores1, pores2;
  if (!pores1_path.empty() && !pores2_path.empty()) {
    pores1 = load_ground_truth(pores1_path);
    pores2 = load_ground_truth(pores2_path);
  } else {
    PK_CHECK(!model.empty(), ErrorKind::kInvalidArgument,
             "align needs either --pores1/--pores2 or --model");
    const Sequential<float> net = load_detector_model(model, cfg);
    const DetectorConfig detect = detector_config(cfg);
    pores1 = detection_centers(detect_pores(img1, net, detect));
    pores2 = detection_centers(detect_pores(img2, net, detect));
  }
  const int median_kernel =
      static_cast<int>(cfg.get_int("enhance.median_kernel"));
  const double clahe_clip = cfg.get_double("enhance.clahe_clip");
  const AlignmentState state =
      align_pair(enhance_image(img1, median_kernel, clahe_clip),
                 enhance_image(img2, median_kernel, clahe_clip), pores1,
                 pores2, alignment_config(cfg));
  std::cout << "angle=" << format_double(state.transform.angle) << "\n"
            << "t_row=" << format_double(state.transform.t_row) << "\n"
            << "t_col=" << format_double(state.transform.t_col) << "\n"
            << "w=" << format_double(state.w) << "\n"
            << "iterations=" << state.iteration << "\n"
            << "correspondences=" << state.correspondences.size() << "\n";
  return 0;
}

int cmd_build_annotations(const RunConfig& cfg, const std::string& data,
                          const std::string& layout, const std::string& model,
                          const std::string& out) {
  std::vector<std::string> warnings;
  const DatasetManifest manifest = ingest(data, layout, &warnings);
  const Sequential<float> net = load_detector_model(model, cfg);
  const auto groups = group_by_subject(manifest);

  std::vector<std::vector<GrayImage>> subjects;
  std::vector<std::vector<std::vector<Point>>> pores;
  const DetectorConfig detect = detector_config(cfg);
  for (const auto& [subject, entries] : groups) {
    std::vector<GrayImage> images;
    std::vector<std::vector<Point>> image_pores;
    for (const ManifestEntry& e : entries) {
      images.push_back(load_image(manifest.image_file(e)));
      image_pores.push_back(
          detection_centers(detect_pores(images.back(), net, detect)));
    }
    subjects.push_back(std::move(images));
    pores.push_back(std::move(image_pores));
  }
  const AnnotatedPatchSet set = build_identity_dataset_from_pores(
      subjects, pores, identity_dataset_config(cfg), &warnings);
  print_warnings(warnings);
  save_patch_set(out, set);
  std::cout << "patches=" << set.patches.size() << "\n"
            << "labels=" << set.label_count() << "\n";
  return 0;
}

int cmd_train_descriptor(const RunConfig& cfg, const std::string& annotations,
                         const std::string& model) {
  const AnnotatedPatchSet all = load_patch_set(annotations);

  std::vector<int> subject_ids;
  for (int s : all.subjects) {
    if (std::find(subject_ids.begin(), subject_ids.end(), s) ==
        subject_ids.end()) {
      subject_ids.push_back(s);
    }
  }
  std::sort(subject_ids.begin(), subject_ids.end());
  PK_CHECK(subject_ids.size() >= 2, ErrorKind::kInvalidData,
           "descriptor training needs at least 2 subjects for a "
           "subject-disjoint validation split");

  Rng rng(cfg.get_u64("seed"));
  Rng split_rng = rng.fork("descnet-split");
  for (std::size_t i = subject_ids.size() - 1; i > 0; --i) {
    const std::size_t j =
        static_cast<std::size_t>(split_rng.uniform_int(i + 1));
    std::swap(subject_ids[i], subject_ids[j]);
  }
  const double fraction = cfg.get_double("experiment.descnet_train_fraction");
  const int n_subjects = static_cast<int>(subject_ids.size());
  const int n_fit = std::clamp(
      static_cast<int>(std::lround(fraction * n_subjects)), 1, n_subjects - 1);
  const std::vector<int> fit_ids(subject_ids.begin(),
                                 subject_ids.begin() + n_fit);

  auto filter = [&](bool keep_fit) {
    AnnotatedPatchSet out;
    for (std::size_t i = 0; i < all.patches.size(); ++i) {
      const bool in_fit = std::find(fit_ids.begin(), fit_ids.end(),
                                    all.subjects[i]) != fit_ids.end();
      if (in_fit != keep_fit) continue;
      out.patches.push_back(all.patches[i]);
      out.labels.push_back(all.labels[i]);
      out.subjects.push_back(all.subjects[i]);
      out.source_images.push_back(all.source_images[i]);
    }
    return out;
  };

  Rng train_rng = rng.fork("recognition-descnet");
  DescNetTrainResult result = train_descnet(filter(true), filter(false),
                                            descnet_config(cfg), train_rng);
  save_model(result.model,
             {{"architecture", "pore-descriptor"},
              {"seed", cfg.raw("seed")},
              {"steps", std::to_string(result.best_step)},
              {"lr", cfg.raw("descnet.lr")},
              {"margin", cfg.raw("descnet.margin")},
              {"batch_size", cfg.raw("descnet.batch_size")}},
             model);
  std::cout << "best_step=" << result.best_step << "\n"
            << "best_val_eer=" << format_double(result.best_val_eer) << "\n";
  return 0;
}

std::vector<Descriptor> describe_backend(const RunConfig& cfg,
                                         const std::string& backend,
                                         const GrayImage& raw,
                                         const std::vector<Point>& centers,
                                         const Sequential<float>* descnet) {
  if (backend == "learned") {
    PK_CHECK(descnet != nullptr, ErrorKind::kInvalidArgument,
             "the learned backend needs --descriptor");
    return describe_pores(raw, centers, *descnet);
  }
  const GrayImage enhanced = enhance_image(
      raw, static_cast<int>(cfg.get_int("enhance.median_kernel")),
      cfg.get_double("enhance.clahe_clip"));
  if (backend == "sift") {
    return sift_describe(enhanced, centers, cfg.get_double("sift.scale"));
  }
  return dp_describe(enhanced, centers,
                     static_cast<int>(cfg.get_int("dp.patch_size")));
}

int cmd_match(const RunConfig& cfg, const std::string& image_a,
              const std::string& image_b, const std::string& detector,
              const std::string& descriptor, const std::string& backend) {
  const Sequential<float> det = load_detector_model(detector, cfg);
  Sequential<float> descnet;
  const bool learned = backend == "learned";
  if (learned) descnet = load_descriptor_model(descriptor, cfg);

  const DetectorConfig detect = detector_config(cfg);
  const GrayImage a = load_image(image_a);
  const GrayImage b = load_image(image_b);
  const std::vector<Point> pa = detection_centers(detect_pores(a, det, detect));
  const std::vector<Point> pb = detection_centers(detect_pores(b, det, detect));
  const int score = match_fingerprints(
      describe_backend(cfg, backend, a, pa, learned ? &descnet : nullptr),
      describe_backend(cfg, backend, b, pb, learned ? &descnet : nullptr),
      cfg.get_double("match.ratio"));
  std::cout << score << "\n";
  return 0;
}

int cmd_eval_recognition(const RunConfig& cfg, const std::string& data,
                         const std::string& layout, const std::string& backend,
                         const std::string& detector,
                         const std::string& descriptor,
                         const std::string& out) {
  std::vector<std::string> warnings;
  const DatasetManifest manifest = ingest(data, layout, &warnings);
  const Sequential<float> det = load_detector_model(detector, cfg);
  Sequential<float> descnet;
  const bool learned = backend == "learned";
  if (learned) descnet = load_descriptor_model(descriptor, cfg);

  std::vector<ManifestEntry> entries = manifest.entries;
  std::sort(entries.begin(), entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) {
              return std::tie(a.subject, a.session, a.index) <
                     std::tie(b.subject, b.session, b.index);
            });

  const DetectorConfig detect = detector_config(cfg);
  std::vector<ImageKey> keys;
  std::vector<std::vector<Descriptor>> descriptors;
  for (const ManifestEntry& e : entries) {
    const GrayImage img = load_image(manifest.image_file(e));
    const std::vector<Point> centers =
        detection_centers(detect_pores(img, det, detect));
    keys.push_back({e.subject, e.session, e.index});
    descriptors.push_back(describe_backend(cfg, backend, img, centers,
                                           learned ? &descnet : nullptr));
  }

  const ProtocolPairs protocol = gen_protocol(keys, &warnings);
  print_warnings(warnings);
  PK_CHECK(!protocol.genuine.empty() && !protocol.impostor.empty(),
           ErrorKind::kInvalidData,
           "protocol needs at least one genuine and one impostor pair");

  const double ratio = cfg.get_double("match.ratio");
  std::vector<ScoredPair> scored;
  std::vector<double> genuine, impostor;
  auto score_pairs = [&](const std::vector<std::pair<int, int>>& pairs,
                         bool is_genuine) {
    char id[48];
    for (const auto& [a, b] : pairs) {
      const double score =
          match_fingerprints(descriptors[static_cast<std::size_t>(a)],
                             descriptors[static_cast<std::size_t>(b)], ratio);
      ScoredPair sp;
      const ImageKey& ka = keys[static_cast<std::size_t>(a)];
      std::snprintf(id, sizeof(id), "s%03d/%d/%02d", ka.subject, ka.session,
                    ka.index);
      sp.id_a = id;
      const ImageKey& kb = keys[static_cast<std::size_t>(b)];
      std::snprintf(id, sizeof(id), "s%03d/%d/%02d", kb.subject, kb.session,
                    kb.index);
      sp.id_b = id;
      sp.genuine = is_genuine;
      sp.score = score;
      scored.push_back(sp);
      (is_genuine ? genuine : impostor).push_back(score);
    }
  };
  score_pairs(protocol.genuine, true);
  score_pairs(protocol.impostor, false);
  const RocCurve roc = roc_eer(genuine, impostor);

  if (!out.empty()) {
    fs::create_directories(out);
    save_run_config((fs::path(out) / "config.txt").string(), cfg);
    save_scores_csv((fs::path(out) / "scores.csv").string(), scored);
    save_roc_csv((fs::path(out) / "roc.csv").string(), roc);
  }
  std::cout << "genuine_pairs=" << protocol.genuine.size() << "\n"
            << "impostor_pairs=" << protocol.impostor.size() << "\n"
            << "eer=" << format_double(roc.eer) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// selftest: small independent oracles for the numerically delicate pieces.

double box_iou_ref(const Detection& a, const Detection& b, int box) {
  const double dr = std::abs(a.row - b.row), dc = std::abs(a.col - b.col);
  const double inter =
      std::max(0.0, box - dr) * std::max(0.0, box - dc);
  return inter / (2.0 * box * box - inter);
}

std::vector<Detection> nms_oracle(std::vector<Detection> boxes, double iou_t,
                                  int box) {
  std::sort(boxes.begin(), boxes.end(),
            [](const Detection& a, const Detection& b) {
              return std::tie(b.probability, a.row, a.col) <
                     std::tie(a.probability, b.row, b.col);
            });
  std::vector<Detection> kept;
  std::vector<bool> dead(boxes.size(), false);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (dead[i]) continue;
    kept.push_back(boxes[i]);
    for (std::size_t j = i + 1; j < boxes.size(); ++j) {
      if (!dead[j] && box_iou_ref(boxes[i], boxes[j], box) > iou_t)
        dead[j] = true;
    }
  }
  return kept;
}

bool selftest_gradients() {
  Sequential<double> net = build_detector(0.5).cast<double>();
  Rng init(41);
  net.init_params(init);
  TensorD x({2, 17, 17, 1});
  Rng xrng(42);
  for (std::int64_t i = 0; i < x.size(); ++i) x[i] = xrng.uniform();
  TensorD target({2, 1, 1, 1});
  target[0] = 1.0;
  target[1] = 0.0;
  auto loss_fn = [&](Sequential<double>& m) {
    Rng drop(7);
    return bce_loss(m.forward(x, Mode::kTrain, &drop), target);
  };
  auto grad_fn = [&](Sequential<double>& m) {
    m.zero_grads();
    Rng drop(7);
    Tape<double> tape;
    const TensorD pred = m.forward(x, Mode::kTrain, &drop, &tape);
    m.backward(tape, bce_logit_grad(pred, target),
               static_cast<int>(m.layer_count()) - 2);
  };
  const GradCheckReport report =
      grad_check(net, loss_fn, grad_fn, 1e-3, 300, 5);
  return report.max_rel_err < 1e-4;
}

bool selftest_descriptor_gradients() {
  Sequential<double> net = build_descnet(0.3).cast<double>();
  Rng init(51);
  net.init_params(init);
  TensorD x({8, 32, 32, 1});
  Rng xrng(52);
  for (std::int64_t i = 0; i < x.size(); ++i) x[i] = xrng.uniform();
  const std::vector<int> labels = {0, 0, 1, 1, 2, 2, 3, 3};
  auto loss_fn = [&](Sequential<double>& m) {
    Rng drop(7);
    return triplet_semihard_loss(m.forward(x, Mode::kTrain, &drop), labels, 2.0)
        .loss;
  };
  auto grad_fn = [&](Sequential<double>& m) {
    m.zero_grads();
    Rng drop(7);
    Tape<double> tape;
    const TensorD emb = m.forward(x, Mode::kTrain, &drop, &tape);
    TensorD grad(emb.shape());
    triplet_semihard_loss(emb, labels, 2.0, &grad);
    m.backward(tape, grad);
  };
  const GradCheckReport report =
      grad_check(net, loss_fn, grad_fn, 1e-3, 200, 5);
  return report.max_rel_err < 1e-4;
}

bool selftest_nms() {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(30));
    std::vector<Detection> boxes;
    for (int i = 0; i < n; ++i) {
      boxes.push_back({static_cast<int>(rng.uniform_int(20)),
                       static_cast<int>(rng.uniform_int(20)),
                       0.1 * (1 + rng.uniform_int(9))});
    }
    const double iou_t = 0.1 * (1 + rng.uniform_int(8));
    const auto got = nms(boxes, iou_t, 7);
    const auto want = nms_oracle(boxes, iou_t, 7);
    if (got.size() != want.size()) return false;
    for (std::size_t i = 0; i < got.size(); ++i) {
      if (got[i].row != want[i].row || got[i].col != want[i].col) return false;
    }
  }
  return true;
}

bool selftest_matcher() {
  Rng rng(1234);
  for (int trial = 0; trial < 200; ++trial) {
    const int na = 2 + static_cast<int>(rng.uniform_int(8));
    const int nb = 2 + static_cast<int>(rng.uniform_int(8));
    Eigen::MatrixXd dist(na, nb);
    for (int i = 0; i < na; ++i)
      for (int j = 0; j < nb; ++j) dist(i, j) = rng.uniform();
    const double ratio = 0.5 + 0.4 * rng.uniform();
    const auto got = match_from_distances(dist, ratio);

    std::vector<Correspondence> want;
    for (int i = 0; i < na; ++i) {
      int bi = 0;
      for (int j = 1; j < nb; ++j)
        if (dist(i, j) < dist(i, bi)) bi = j;
      double second_a = std::numeric_limits<double>::infinity();
      for (int j = 0; j < nb; ++j)
        if (j != bi) second_a = std::min(second_a, dist(i, j));
      int ai = 0;
      for (int k = 1; k < na; ++k)
        if (dist(k, bi) < dist(ai, bi)) ai = k;
      if (ai != i) continue;
      double second_b = std::numeric_limits<double>::infinity();
      for (int k = 0; k < na; ++k)
        if (k != i) second_b = std::min(second_b, dist(k, bi));
      if (dist(i, bi) < ratio * second_a && dist(i, bi) < ratio * second_b) {
        want.push_back({i, bi, dist(i, bi)});
      }
    }
    if (got.size() != want.size()) return false;
    for (std::size_t k = 0; k < got.size(); ++k) {
      if (got[k].index_a != want[k].index_a ||
          got[k].index_b != want[k].index_b) {
        return false;
      }
    }
  }
  return true;
}

bool selftest_horn() {
  Rng rng(555);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_int(49));
    RigidTransform truth{(rng.uniform() - 0.5) * 3.0,
                         (rng.uniform() - 0.5) * 40.0,
                         (rng.uniform() - 0.5) * 40.0};
    std::vector<Point> q, p;
    for (int i = 0; i < n; ++i) {
      Point pt{rng.uniform() * 100.0, rng.uniform() * 100.0};
      q.push_back(pt);
      p.push_back(truth.apply(pt));
    }
    // Skip coincident configurations the solver rightfully rejects.
    if (n == 2 && sq_dist(q[0], q[1]) < 1e-12) continue;
    const RigidTransform est = horn_align(p, q);
    if (std::abs(std::remainder(est.angle - truth.angle, 2.0 * M_PI)) > 1e-6)
      return false;
    if (std::abs(est.t_row - truth.t_row) > 1e-6 ||
        std::abs(est.t_col - truth.t_col) > 1e-6) {
      return false;
    }
  }
  return true;
}

int cmd_selftest() {
  bool ok = true;
  auto report = [&ok](const char* name, bool pass) {
    std::printf("%-28s %s\n", name, pass ? "PASS" : "FAIL");
    if (!pass) ok = false;
  };
  report("gradient check (detector)", selftest_gradients());
  report("gradient check (descriptor)", selftest_descriptor_gradients());
  report("nms vs oracle", selftest_nms());
  report("matcher vs oracle", selftest_matcher());
  report("horn recovery", selftest_horn());
  return ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"High-resolution fingerprint pore detection and recognition"};
  app.require_subcommand(1);

  CommonOpts common;
  app.add_option("--config", common.config_path,
                 "Key=value config file (missing keys keep their defaults)")
      ->check(CLI::ExistingFile);
  app.add_option("--set", common.sets, "Override a config key (key=value)");
  app.add_option("--seed", common.seed, "Override the config seed")
      ->each([&common](const std::string&) { common.seed_given = true; });

  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset");
  std::string synth_out, synth_kind = "detection";
  int synth_train = 15, synth_val = 5, synth_test = 10, synth_subjects = 10;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--kind", synth_kind, "detection | recognition")
      ->check(CLI::IsMember({"detection", "recognition"}));
  synth->add_option("--train", synth_train, "Training images (detection)");
  synth->add_option("--val", synth_val, "Validation images (detection)");
  synth->add_option("--test", synth_test, "Test images (detection)");
  synth->add_option("--subjects", synth_subjects, "Subjects (recognition)");

  auto* traind = app.add_subcommand("train-detector",
                                    "Train the pore detection network");
  std::string traind_data, traind_layout = "synthetic", traind_model;
  traind->add_option("--data", traind_data, "Dataset root")
      ->required()
      ->check(CLI::ExistingDirectory);
  traind->add_option("--layout", traind_layout,
                     "synthetic | groundtruth | db")
      ->check(CLI::IsMember({"synthetic", "groundtruth", "db"}));
  traind->add_option("--model", traind_model, "Output model file")->required();

  auto* detect = app.add_subcommand("detect", "Detect pores in one image");
  std::string detect_model, detect_image, detect_out;
  detect->add_option("--model", detect_model, "Detector model")
      ->required()
      ->check(CLI::ExistingFile);
  detect->add_option("--image", detect_image, "Input image (PGM or PNG)")
      ->required()
      ->check(CLI::ExistingFile);
  detect->add_option("--out", detect_out,
                     "Detections file (stdout when omitted)");

  auto* evald = app.add_subcommand("eval-detect",
                                   "Score detections against ground truth");
  std::string evald_dets, evald_truth, evald_out;
  evald->add_option("--detections", evald_dets, "Detections file")
      ->required()
      ->check(CLI::ExistingFile);
  evald->add_option("--truth", evald_truth, "Ground-truth file")
      ->required()
      ->check(CLI::ExistingFile);
  evald->add_option("--out", evald_out, "Report file (optional)");

  auto* align = app.add_subcommand("align", "Align two fingerprint images");
  std::string align_img1, align_img2, align_p1, align_p2, align_model;
  align->add_option("--image1", align_img1, "Reference image")
      ->required()
      ->check(CLI::ExistingFile);
  align->add_option("--image2", align_img2, "Image to align")
      ->required()
      ->check(CLI::ExistingFile);
  align->add_option("--pores1", align_p1, "Pore file for image 1")
      ->check(CLI::ExistingFile);
  align->add_option("--pores2", align_p2, "Pore file for image 2")
      ->check(CLI::ExistingFile);
  align->add_option("--model", align_model,
                    "Detector model (when no pore files are given)")
      ->check(CLI::ExistingFile);

  auto* annot = app.add_subcommand(
      "build-annotations", "Detect, align, and label pores per subject");
  std::string annot_data, annot_layout = "db", annot_model, annot_out;
  annot->add_option("--data", annot_data, "Dataset root")
      ->required()
      ->check(CLI::ExistingDirectory);
  annot->add_option("--layout", annot_layout, "db | synthetic | groundtruth")
      ->check(CLI::IsMember({"synthetic", "groundtruth", "db"}));
  annot->add_option("--model", annot_model, "Detector model")
      ->required()
      ->check(CLI::ExistingFile);
  annot->add_option("--out", annot_out, "Output patch-set file")->required();

  auto* traindesc = app.add_subcommand("train-descriptor",
                                       "Train the pore descriptor network");
  std::string traindesc_annotations, traindesc_model;
  traindesc->add_option("--annotations", traindesc_annotations,
                        "Annotated patch-set file")
      ->required()
      ->check(CLI::ExistingFile);
  traindesc->add_option("--model", traindesc_model, "Output model file")
      ->required();

  auto* match = app.add_subcommand(
      "match", "Match two fingerprints, printing the integer score");
  std::string match_a, match_b, match_detector, match_descriptor;
  std::string match_backend = "learned";
  match->add_option("image_a", match_a, "First image")
      ->required()
      ->check(CLI::ExistingFile);
  match->add_option("image_b", match_b, "Second image")
      ->required()
      ->check(CLI::ExistingFile);
  match->add_option("--detector", match_detector, "Detector model")
      ->required()
      ->check(CLI::ExistingFile);
  match->add_option("--descriptor", match_descriptor,
                    "Descriptor model (learned backend)")
      ->check(CLI::ExistingFile);
  match->add_option("--backend", match_backend, "learned | sift | dp")
      ->check(CLI::IsMember({"learned", "sift", "dp"}));

  auto* evalr = app.add_subcommand("eval-recognition",
                                   "Run the full comparison protocol");
  std::string evalr_data, evalr_layout = "db", evalr_backend = "learned";
  std::string evalr_detector, evalr_descriptor, evalr_out;
  evalr->add_option("--data", evalr_data, "Dataset root")
      ->required()
      ->check(CLI::ExistingDirectory);
  evalr->add_option("--layout", evalr_layout, "db | synthetic")
      ->check(CLI::IsMember({"synthetic", "db"}));
  evalr->add_option("--backend", evalr_backend, "learned | sift | dp")
      ->check(CLI::IsMember({"learned", "sift", "dp"}));
  evalr->add_option("--detector", evalr_detector, "Detector model")
      ->required()
      ->check(CLI::ExistingFile);
  evalr->add_option("--descriptor", evalr_descriptor,
                    "Descriptor model (learned backend)")
      ->check(CLI::ExistingFile);
  evalr->add_option("--out", evalr_out, "Directory for scores and ROC");

  auto* exp_det = app.add_subcommand("experiment-detection",
                                     "Detection experiment end to end");
  std::string exp_det_out;
  exp_det->add_option("--out", exp_det_out, "Output directory")->required();

  auto* exp_align = app.add_subcommand("experiment-alignment",
                                       "Alignment experiment end to end");
  std::string exp_align_out;
  exp_align->add_option("--out", exp_align_out, "Output directory")
      ->required();

  auto* exp_rec = app.add_subcommand("experiment-recognition",
                                     "Recognition ablation end to end");
  std::string exp_rec_out;
  exp_rec->add_option("--out", exp_rec_out, "Output directory")->required();

  auto* selftest =
      app.add_subcommand("selftest", "Run the built-in oracle checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    const RunConfig cfg = make_config(common);
    if (app.got_subcommand(synth)) {
      return cmd_synth(cfg, synth_out, synth_kind, synth_train, synth_val,
                       synth_test, synth_subjects);
    }
    if (app.got_subcommand(traind)) {
      return cmd_train_detector(cfg, traind_data, traind_layout, traind_model);
    }
    if (app.got_subcommand(detect)) {
      return cmd_detect(cfg, detect_model, detect_image, detect_out);
    }
    if (app.got_subcommand(evald)) {
      return cmd_eval_detect(evald_dets, evald_truth, evald_out);
    }
    if (app.got_subcommand(align)) {
      return cmd_align(cfg, align_img1, align_img2, align_p1, align_p2,
                       align_model);
    }
    if (app.got_subcommand(annot)) {
      return cmd_build_annotations(cfg, annot_data, annot_layout, annot_model,
                                   annot_out);
    }
    if (app.got_subcommand(traindesc)) {
      return cmd_train_descriptor(cfg, traindesc_annotations, traindesc_model);
    }
    if (app.got_subcommand(match)) {
      PK_CHECK(match_backend != "learned" || !match_descriptor.empty(),
               ErrorKind::kInvalidArgument,
               "the learned backend needs --descriptor");
      return cmd_match(cfg, match_a, match_b, match_detector, match_descriptor,
                       match_backend);
    }
    if (app.got_subcommand(evalr)) {
      PK_CHECK(evalr_backend != "learned" || !evalr_descriptor.empty(),
               ErrorKind::kInvalidArgument,
               "the learned backend needs --descriptor");
      return cmd_eval_recognition(cfg, evalr_data, evalr_layout, evalr_backend,
                                  evalr_detector, evalr_descriptor, evalr_out);
    }
    if (app.got_subcommand(exp_det)) {
      const DetectionExperimentResult r =
          run_detection_experiment(cfg, exp_det_out);
      std::cout << "best_prob_threshold="
                << format_double(r.best_prob_threshold) << "\n"
                << "best_nms_iou=" << format_double(r.best_nms_iou) << "\n"
                << "val_f=" << format_double(r.val_f) << "\n"
                << "test_f=" << format_double(r.test_f) << "\n";
      return 0;
    }
    if (app.got_subcommand(exp_align)) {
      const AlignmentExperimentResult r =
          run_alignment_experiment(cfg, exp_align_out);
      std::cout << "median_theta_err=" << format_double(r.median_theta_err)
                << "\n"
                << "median_trans_err=" << format_double(r.median_trans_err)
                << "\n"
                << "failures=" << r.failures << "\n";
      return 0;
    }
    if (app.got_subcommand(exp_rec)) {
      const RecognitionExperimentResult r =
          run_recognition_experiment(cfg, exp_rec_out);
      std::cout << "eer_learned=" << format_double(r.eer_learned) << "\n"
                << "eer_sift=" << format_double(r.eer_sift) << "\n"
                << "eer_dp=" << format_double(r.eer_dp) << "\n";
      return 0;
    }
    if (app.got_subcommand(selftest)) {
      return cmd_selftest();
    }
  } catch (const porekit::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
