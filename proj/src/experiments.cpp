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

#include "porekit/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "porekit/common.hpp"
#include "porekit/dataset.hpp"
#include "porekit/descnet.hpp"
#include "porekit/model_io.hpp"
#include "porekit/recognition.hpp"
#include "porekit/sift.hpp"

namespace porekit {

namespace fs = std::filesystem;

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  PK_CHECK(out.good(), ErrorKind::kFormat, "cannot write: " + path);
  out << text;
  PK_CHECK(out.good(), ErrorKind::kFormat, "write failed: " + path);
}

// Micro-averaged F-score: true positives, detections, and ground-truth pores
// are pooled across images before forming precision and recall.
double micro_f_score(const std::vector<std::vector<Point>>& detections,
                     const std::vector<std::vector<Point>>& gt) {
  double tp = 0.0, nd = 0.0, ng = 0.0;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const DetectionEvalReport rep = evaluate_detection(detections[i], gt[i]);
    tp += rep.true_positives;
    nd += static_cast<double>(detections[i].size());
    ng += static_cast<double>(gt[i].size());
  }
  if (nd <= 0.0 || ng <= 0.0) return 0.0;
  const double precision = tp / nd;
  const double recall = tp / ng;
  if (precision + recall <= 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double median(std::vector<double> v) {
  PK_CHECK(!v.empty(), ErrorKind::kInvalidArgument, "median of empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string image_id(int subject, int session, int index) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "s%03d/%d/%02d", subject, session, index);
  return buf;
}

}  // namespace

DetectionExperimentResult run_detection_experiment(const RunConfig& cfg,
                                                   const std::string& out_dir) {
  fs::create_directories(out_dir);
  save_run_config((fs::path(out_dir) / "config.txt").string(), cfg);

  Rng rng(cfg.get_u64("seed"));
  const int n_train =
      static_cast<int>(cfg.get_int("experiment.detection_train_images"));
  const int n_val =
      static_cast<int>(cfg.get_int("experiment.detection_val_images"));
  const int n_test =
      static_cast<int>(cfg.get_int("experiment.detection_test_images"));

  Rng data_rng = rng.fork("detection-data");
  const DatasetManifest manifest =
      write_detection_dataset((fs::path(out_dir) / "dataset").string(),
                              synth_config(cfg), n_train, n_val, n_test,
                              data_rng);

  auto load_split = [&](const std::string& split) {
    std::vector<LabeledImage> images;
    for (const ManifestEntry& e : manifest.with_split(split)) {
      images.push_back(load_labeled_image(manifest, e));
    }
    return images;
  };
  const std::vector<LabeledImage> train = load_split("train");
  const std::vector<LabeledImage> val = load_split("val");
  const std::vector<LabeledImage> test = load_split("test");

  Rng train_rng = rng.fork("detection-train");
  DetectorTrainResult trained =
      train_detector(train, val, detector_train_config(cfg), train_rng);

  save_model(trained.model,
             {{"architecture", "pore-detector"},
              {"seed", cfg.raw("seed")},
              {"steps", std::to_string(trained.best_step)},
              {"lr", cfg.raw("detector.lr")},
              {"batch_size", cfg.raw("detector.batch_size")}},
             (fs::path(out_dir) / "detector.pknn").string());

  {
    std::string csv = "step,loss\n";
    for (std::size_t i = 0; i < trained.step_losses.size(); ++i) {
      csv += std::to_string(i + 1) + "," +
             format_double(trained.step_losses[i]) + "\n";
    }
    write_text((fs::path(out_dir) / "train_losses.csv").string(), csv);
  }
  {
    std::string csv = "step,f_score\n";
    for (const auto& [step, f] : trained.val_fscores) {
      csv += std::to_string(step) + "," + format_double(f) + "\n";
    }
    write_text((fs::path(out_dir) / "val_fscores.csv").string(), csv);
  }

  auto maps_of = [&](const std::vector<LabeledImage>& images) {
    std::vector<ProbabilityMap> maps;
    maps.reserve(images.size());
    for (const LabeledImage& li : images) {
      maps.push_back(compute_probability_map(trained.model, li.image));
    }
    return maps;
  };
  auto gt_of = [](const std::vector<LabeledImage>& images) {
    std::vector<std::vector<Point>> gt;
    gt.reserve(images.size());
    for (const LabeledImage& li : images) gt.push_back(li.pores);
    return gt;
  };

  DetectionExperimentResult result;
  result.best_step = trained.best_step;

  const std::vector<ProbabilityMap> val_maps = maps_of(val);
  const std::vector<std::vector<Point>> val_gt = gt_of(val);
  DetectorConfig detect = detector_config(cfg);
  std::string grid_csv = "prob_threshold,nms_iou,f_score\n";
  for (int pi = 1; pi <= 9; ++pi) {
    for (int ii = 1; ii <= 9; ++ii) {
      DetectorConfig trial = detect;
      trial.prob_threshold = pi / 10.0;
      trial.nms_iou_threshold = ii / 10.0;
      std::vector<std::vector<Point>> dets;
      dets.reserve(val_maps.size());
      for (const ProbabilityMap& m : val_maps) {
        dets.push_back(detection_centers(detect_from_map(m, trial)));
      }
      const double f = micro_f_score(dets, val_gt);
      grid_csv += format_double(trial.prob_threshold) + "," +
                  format_double(trial.nms_iou_threshold) + "," +
                  format_double(f) + "\n";
      if (f > result.val_f) {
        result.val_f = f;
        result.best_prob_threshold = trial.prob_threshold;
        result.best_nms_iou = trial.nms_iou_threshold;
      }
    }
  }
  write_text((fs::path(out_dir) / "grid.csv").string(), grid_csv);

  detect.prob_threshold = result.best_prob_threshold;
  detect.nms_iou_threshold = result.best_nms_iou;
  const std::vector<ProbabilityMap> test_maps = maps_of(test);
  std::vector<std::vector<Point>> test_dets;
  test_dets.reserve(test_maps.size());
  for (const ProbabilityMap& m : test_maps) {
    test_dets.push_back(detection_centers(detect_from_map(m, detect)));
  }
  result.test_f = micro_f_score(test_dets, gt_of(test));

  write_text((fs::path(out_dir) / "report.txt").string(),
             "best_prob_threshold=" +
                 format_double(result.best_prob_threshold) + "\n" +
                 "best_nms_iou=" + format_double(result.best_nms_iou) + "\n" +
                 "best_step=" + std::to_string(result.best_step) + "\n" +
                 "val_f=" + format_double(result.val_f) + "\n" +
                 "test_f=" + format_double(result.test_f) + "\n");
  return result;
}

AlignmentExperimentResult run_alignment_experiment(const RunConfig& cfg,
                                                   const std::string& out_dir) {
  fs::create_directories(out_dir);
  save_run_config((fs::path(out_dir) / "config.txt").string(), cfg);

  Rng rng(cfg.get_u64("seed"));
  const int n_pairs =
      static_cast<int>(cfg.get_int("experiment.alignment_pairs"));
  PK_CHECK(n_pairs >= 1, ErrorKind::kInvalidArgument,
           "need at least one alignment pair");

  // Each impression draws half the pair spread, so the relative transform
  // between the two spans the full configured range.
  SynthConfig sy = synth_config(cfg);
  sy.sessions = 1;
  sy.impressions_per_session = 2;
  sy.theta_spread = cfg.get_double("experiment.align_theta_spread") / 2.0;
  sy.translation_spread =
      cfg.get_double("experiment.align_translation_spread") / 2.0;
  sy.jitter_sigma = cfg.get_double("experiment.align_jitter_sigma");

  const AlignmentConfig align = alignment_config(cfg);
  const int median_kernel =
      static_cast<int>(cfg.get_int("enhance.median_kernel"));
  const double clahe_clip = cfg.get_double("enhance.clahe_clip");
  const Point center{(sy.rows - 1) / 2.0, (sy.cols - 1) / 2.0};
  const double inf = std::numeric_limits<double>::infinity();

  AlignmentExperimentResult result;
  std::string csv =
      "pair,failed,true_angle,est_angle,theta_err,trans_err,w_initial,"
      "w_final,iterations\n";
  std::vector<double> theta_errs, trans_errs;
  for (int k = 0; k < n_pairs; ++k) {
    Rng pair_rng = rng.fork("align-pair-" + std::to_string(k));
    const SynthSubject subject = gen_subject(sy, pair_rng);
    const SynthImpression& a = subject.impressions[0];
    const SynthImpression& b = subject.impressions[1];
    const RigidTransform truth = compose(a.transform, b.transform.inverse());

    AlignmentPairResult pr;
    pr.pair = k;
    pr.true_angle = truth.angle;
    try {
      const AlignmentState st = align_pair(
          enhance_image(a.image, median_kernel, clahe_clip),
          enhance_image(b.image, median_kernel, clahe_clip), a.pores, b.pores,
          align);
      pr.est_angle = st.transform.angle;
      pr.theta_err =
          std::fabs(std::remainder(st.transform.angle - truth.angle,
                                   2.0 * M_PI));
      pr.trans_err =
          std::sqrt(sq_dist(st.transform.apply(center), truth.apply(center)));
      pr.w_initial = st.w_initial;
      pr.w_final = st.w;
      pr.iterations = st.iteration;
      if (pr.w_final > pr.w_initial) result.w_monotone = false;
    } catch (const Error&) {
      pr.failed = true;
      pr.est_angle = 0.0;
      pr.theta_err = inf;
      pr.trans_err = inf;
      ++result.failures;
    }
    theta_errs.push_back(pr.theta_err);
    trans_errs.push_back(pr.trans_err);
    csv += std::to_string(pr.pair) + "," + (pr.failed ? "1" : "0") + "," +
           format_double(pr.true_angle) + "," + format_double(pr.est_angle) +
           "," + format_double(pr.theta_err) + "," +
           format_double(pr.trans_err) + "," + format_double(pr.w_initial) +
           "," + format_double(pr.w_final) + "," +
           std::to_string(pr.iterations) + "\n";
    result.pairs.push_back(pr);
  }
  result.median_theta_err = median(theta_errs);
  result.median_trans_err = median(trans_errs);

  write_text((fs::path(out_dir) / "pairs.csv").string(), csv);
  write_text((fs::path(out_dir) / "report.txt").string(),
             "pairs=" + std::to_string(n_pairs) + "\n" +
                 "failures=" + std::to_string(result.failures) + "\n" +
                 "median_theta_err=" +
                 format_double(result.median_theta_err) + "\n" +
                 "median_trans_err=" +
                 format_double(result.median_trans_err) + "\n" +
                 "w_monotone=" + (result.w_monotone ? "1" : "0") + "\n");
  return result;
}

RecognitionExperimentResult run_recognition_experiment(
    const RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  fs::create_directories(fs::path(out_dir) / "detections");
  save_run_config((fs::path(out_dir) / "config.txt").string(), cfg);

  Rng rng(cfg.get_u64("seed"));
  const int n_train =
      static_cast<int>(cfg.get_int("experiment.recognition_train_subjects"));
  const int n_test =
      static_cast<int>(cfg.get_int("experiment.recognition_test_subjects"));
  PK_CHECK(n_train >= 2 && n_test >= 2, ErrorKind::kInvalidArgument,
           "need at least 2 training and 2 test subjects");
  const SynthConfig sy = synth_config(cfg);

  std::vector<SynthSubject> subjects;
  subjects.reserve(static_cast<std::size_t>(n_train + n_test));
  for (int s = 0; s < n_train + n_test; ++s) {
    Rng subj_rng = rng.fork("subject-" + std::to_string(s));
    subjects.push_back(gen_subject(sy, subj_rng));
  }

  // Detector training on the training subjects' masters; the last fifth
  // serves as the early-stopping validation set.
  std::vector<LabeledImage> det_train, det_val;
  const int n_det_val = std::max(1, n_train / 5);
  for (int s = 0; s < n_train; ++s) {
    LabeledImage li{subjects[static_cast<std::size_t>(s)].master,
                    subjects[static_cast<std::size_t>(s)].pores};
    (s < n_train - n_det_val ? det_train : det_val).push_back(std::move(li));
  }
  Rng det_rng = rng.fork("recognition-detector");
  DetectorTrainResult det =
      train_detector(det_train, det_val, detector_train_config(cfg), det_rng);
  save_model(det.model,
             {{"architecture", "pore-detector"},
              {"seed", cfg.raw("seed")},
              {"steps", std::to_string(det.best_step)},
              {"lr", cfg.raw("detector.lr")},
              {"batch_size", cfg.raw("detector.batch_size")}},
             (fs::path(out_dir) / "detector.pknn").string());

  // One cached detection pass feeds annotation and all three backends.
  const DetectorConfig detect = detector_config(cfg);
  std::vector<std::vector<std::vector<Point>>> pores(subjects.size());
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    for (std::size_t k = 0; k < subjects[s].impressions.size(); ++k) {
      const SynthImpression& imp = subjects[s].impressions[k];
      const std::vector<Detection> dets =
          detect_pores(imp.image, det.model, detect);
      char name[48];
      std::snprintf(name, sizeof(name), "s%03d_%d_%02d.txt",
                    static_cast<int>(s), imp.session + 1,
                    static_cast<int>(k) % sy.impressions_per_session);
      save_detections((fs::path(out_dir) / "detections" / name).string(),
                      dets);
      pores[s].push_back(detection_centers(dets));
    }
  }

  std::vector<std::string> warnings;
  IdentityDatasetConfig idc = identity_dataset_config(cfg);
  idc.detect = detect;
  std::vector<std::vector<GrayImage>> train_images(
      static_cast<std::size_t>(n_train));
  std::vector<std::vector<std::vector<Point>>> train_pores(
      static_cast<std::size_t>(n_train));
  for (int s = 0; s < n_train; ++s) {
    for (const SynthImpression& imp :
         subjects[static_cast<std::size_t>(s)].impressions) {
      train_images[static_cast<std::size_t>(s)].push_back(imp.image);
    }
    train_pores[static_cast<std::size_t>(s)] =
        pores[static_cast<std::size_t>(s)];
  }
  const AnnotatedPatchSet annotations = build_identity_dataset_from_pores(
      train_images, train_pores, idc, &warnings);
  save_patch_set((fs::path(out_dir) / "annotations.pknn").string(),
                 annotations);

  RecognitionExperimentResult result;
  result.annotation_labels = annotations.label_count();

  // Subject-disjoint descriptor split: a seeded shuffle of the training
  // subjects, the configured fraction for fitting, the rest for validation.
  std::vector<int> order(static_cast<std::size_t>(n_train));
  for (int s = 0; s < n_train; ++s) order[static_cast<std::size_t>(s)] = s;
  Rng split_rng = rng.fork("descnet-split");
  for (int i = n_train - 1; i > 0; --i) {
    const int j = static_cast<int>(
        split_rng.uniform_int(static_cast<std::uint64_t>(i + 1)));
    std::swap(order[static_cast<std::size_t>(i)],
              order[static_cast<std::size_t>(j)]);
  }
  const double fraction = cfg.get_double("experiment.descnet_train_fraction");
  const int n_fit = std::clamp(
      static_cast<int>(std::lround(fraction * n_train)), 1, n_train - 1);
  std::set<int> fit_subjects(order.begin(), order.begin() + n_fit);

  auto filter = [&](bool keep_fit) {
    AnnotatedPatchSet out;
    for (std::size_t i = 0; i < annotations.patches.size(); ++i) {
      if ((fit_subjects.count(annotations.subjects[i]) != 0) != keep_fit)
        continue;
      out.patches.push_back(annotations.patches[i]);
      out.labels.push_back(annotations.labels[i]);
      out.subjects.push_back(annotations.subjects[i]);
      out.source_images.push_back(annotations.source_images[i]);
    }
    return out;
  };
  const AnnotatedPatchSet fit_set = filter(true);
  const AnnotatedPatchSet val_set = filter(false);

  Rng dn_rng = rng.fork("recognition-descnet");
  DescNetTrainResult dn =
      train_descnet(fit_set, val_set, descnet_config(cfg), dn_rng);
  save_model(dn.model,
             {{"architecture", "pore-descriptor"},
              {"seed", cfg.raw("seed")},
              {"steps", std::to_string(dn.best_step)},
              {"lr", cfg.raw("descnet.lr")},
              {"margin", cfg.raw("descnet.margin")},
              {"batch_size", cfg.raw("descnet.batch_size")}},
             (fs::path(out_dir) / "descnet.pknn").string());

  // Comparison protocol over the held-out subjects.
  const int median_kernel =
      static_cast<int>(cfg.get_int("enhance.median_kernel"));
  const double clahe_clip = cfg.get_double("enhance.clahe_clip");
  const double sift_scale = cfg.get_double("sift.scale");
  const int dp_patch = static_cast<int>(cfg.get_int("dp.patch_size"));
  const double ratio = cfg.get_double("match.ratio");

  std::vector<ImageKey> keys;
  std::vector<std::vector<Descriptor>> desc_learned, desc_sift, desc_dp;
  for (int s = n_train; s < n_train + n_test; ++s) {
    const SynthSubject& subject = subjects[static_cast<std::size_t>(s)];
    for (std::size_t k = 0; k < subject.impressions.size(); ++k) {
      const SynthImpression& imp = subject.impressions[k];
      const std::vector<Point>& centers =
          pores[static_cast<std::size_t>(s)][k];
      keys.push_back(
          {s, imp.session + 1,
           static_cast<int>(k) -
               imp.session * sy.impressions_per_session});
      desc_learned.push_back(describe_pores(imp.image, centers, dn.model));
      const GrayImage enhanced =
          enhance_image(imp.image, median_kernel, clahe_clip);
      desc_sift.push_back(sift_describe(enhanced, centers, sift_scale));
      desc_dp.push_back(dp_describe(enhanced, centers, dp_patch));
    }
  }
  const ProtocolPairs protocol = gen_protocol(keys, &warnings);
  result.genuine_pairs = protocol.genuine.size();
  result.impostor_pairs = protocol.impostor.size();

  auto evaluate = [&](const std::vector<std::vector<Descriptor>>& desc,
                      const std::string& backend) {
    std::vector<ScoredPair> scored;
    std::vector<double> genuine, impostor;
    auto score_pairs = [&](const std::vector<std::pair<int, int>>& pairs,
                           bool is_genuine) {
      for (const auto& [a, b] : pairs) {
        const double score = match_fingerprints(
            desc[static_cast<std::size_t>(a)],
            desc[static_cast<std::size_t>(b)], ratio);
        const ImageKey& ka = keys[static_cast<std::size_t>(a)];
        const ImageKey& kb = keys[static_cast<std::size_t>(b)];
        scored.push_back({image_id(ka.subject, ka.session, ka.index),
                          image_id(kb.subject, kb.session, kb.index),
                          is_genuine, score});
        (is_genuine ? genuine : impostor).push_back(score);
      }
    };
    score_pairs(protocol.genuine, true);
    score_pairs(protocol.impostor, false);
    const RocCurve roc = roc_eer(genuine, impostor);
    save_scores_csv(
        (fs::path(out_dir) / ("scores_" + backend + ".csv")).string(),
        scored);
    save_roc_csv((fs::path(out_dir) / ("roc_" + backend + ".csv")).string(),
                 roc);
    return roc.eer;
  };
  result.eer_learned = evaluate(desc_learned, "learned");
  result.eer_sift = evaluate(desc_sift, "sift");
  result.eer_dp = evaluate(desc_dp, "dp");

  {
    std::string text;
    for (const std::string& w : warnings) text += w + "\n";
    write_text((fs::path(out_dir) / "warnings.txt").string(), text);
  }
  write_text(
      (fs::path(out_dir) / "report.txt").string(),
      "annotation_labels=" + std::to_string(result.annotation_labels) + "\n" +
          "annotation_patches=" + std::to_string(annotations.patches.size()) +
          "\n" + "detector_best_step=" + std::to_string(det.best_step) +
          "\n" + "descnet_best_step=" + std::to_string(dn.best_step) + "\n" +
          "genuine_pairs=" + std::to_string(result.genuine_pairs) + "\n" +
          "impostor_pairs=" + std::to_string(result.impostor_pairs) + "\n" +
          "eer_learned=" + format_double(result.eer_learned) + "\n" +
          "eer_sift=" + format_double(result.eer_sift) + "\n" +
          "eer_dp=" + format_double(result.eer_dp) + "\n");
  return result;
}

}  // namespace porekit
