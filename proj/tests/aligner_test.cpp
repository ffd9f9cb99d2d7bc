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

#include <cmath>
#include <filesystem>
#include <vector>

#include "porekit/aligner.hpp"
#include "porekit/image_ops.hpp"
#include "porekit/rng.hpp"
#include "porekit/synth.hpp"

using namespace porekit;

namespace {

std::vector<Point> random_points(int n, double lo, double hi, Rng& rng) {
  std::vector<Point> pts;
  for (int i = 0; i < n; ++i)
    pts.push_back({rng.uniform(lo, hi), rng.uniform(lo, hi)});
  return pts;
}

SynthConfig pair_config(double theta, double translation, double jitter) {
  SynthConfig cfg;
  cfg.sessions = 1;
  cfg.impressions_per_session = 2;
  cfg.theta_spread = theta;
  cfg.translation_spread = translation;
  cfg.jitter_sigma = jitter;
  return cfg;
}

double angle_diff(double a, double b) {
  return std::abs(std::remainder(a - b, 2.0 * M_PI));
}

}  // namespace

TEST_CASE("identical point sets solve to the identity transform") {
  Rng rng(401);
  const auto pts = random_points(10, 0.0, 100.0, rng);
  const RigidTransform t = horn_align(pts, pts);
  CHECK(std::abs(t.angle) <= 1e-12);
  CHECK(std::abs(t.t_row) <= 1e-9);
  CHECK(std::abs(t.t_col) <= 1e-9);
}

TEST_CASE("a pure translation is recovered exactly") {
  Rng rng(403);
  const auto q = random_points(6, 0.0, 50.0, rng);
  std::vector<Point> p;
  for (const Point& pt : q) p.push_back({pt.row + 3.25, pt.col - 7.5});
  const RigidTransform t = horn_align(p, q);
  CHECK(std::abs(t.angle) <= 1e-12);
  CHECK(t.t_row == doctest::Approx(3.25));
  CHECK(t.t_col == doctest::Approx(-7.5));
}

TEST_CASE("random rigid transforms are recovered from noiseless points") {
  Rng rng(405);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_int(49));
    RigidTransform truth{rng.uniform(-1.5, 1.5), rng.uniform(-20.0, 20.0),
                         rng.uniform(-20.0, 20.0)};
    const auto q = random_points(n, 0.0, 100.0, rng);
    if (n == 2 && sq_dist(q[0], q[1]) < 1e-9) continue;
    std::vector<Point> p;
    for (const Point& pt : q) p.push_back(truth.apply(pt));
    const RigidTransform est = horn_align(p, q);
    CHECK(angle_diff(est.angle, truth.angle) <= 1e-6);
    CHECK(std::abs(est.t_row - truth.t_row) <= 1e-6);
    CHECK(std::abs(est.t_col - truth.t_col) <= 1e-6);
  }
}

TEST_CASE("the noisy estimate beats random candidate transforms") {
  Rng rng(407);
  const auto residual = [](const std::vector<Point>& p,
                           const std::vector<Point>& q,
                           const RigidTransform& t) {
    double acc = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k)
      acc += sq_dist(p[k], t.apply(q[k]));
    return acc / static_cast<double>(p.size());
  };
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 10 + static_cast<int>(rng.uniform_int(30));
    RigidTransform truth{rng.uniform(-1.0, 1.0), rng.uniform(-15.0, 15.0),
                         rng.uniform(-15.0, 15.0)};
    const auto q = random_points(n, 0.0, 100.0, rng);
    std::vector<Point> p;
    for (const Point& pt : q) {
      Point moved = truth.apply(pt);
      moved.row += rng.normal(0.0, 0.5);
      moved.col += rng.normal(0.0, 0.5);
      p.push_back(moved);
    }
    const RigidTransform est = horn_align(p, q);
    const double est_res = residual(p, q, est);
    for (int c = 0; c < 200; ++c) {
      RigidTransform cand{rng.uniform(-1.2, 1.2), rng.uniform(-18.0, 18.0),
                          rng.uniform(-18.0, 18.0)};
      CHECK(est_res <= residual(p, q, cand) + 1e-12);
    }
  }
}

TEST_CASE("degenerate point configurations are numeric errors") {
  CHECK_THROWS_AS(horn_align({{1.0, 1.0}}, {{2.0, 2.0}}), Error);
  std::vector<Point> same{{5.0, 5.0}, {5.0, 5.0}, {5.0, 5.0}};
  std::vector<Point> spread{{1.0, 1.0}, {2.0, 2.0}, {3.0, 3.0}};
  CHECK_THROWS_AS(horn_align(spread, same), Error);
}

TEST_CASE("the combined metric adds the weighted aligned-space distance") {
  AlignmentConfig cfg;
  const RigidTransform identity;
  const Point p1{10.0, 10.0};
  const Point p2{10.0, 12.0};
  const double got = combined_distance(1.0, p1, p2, identity, 1.0, cfg);
  CHECK(got == doctest::Approx(1.0 + 500.0 * 4.0 / (1.0 + 1e-5)));

  const double far_w = combined_distance(1.0, p1, p2, identity, 1e9, cfg);
  CHECK(far_w == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("overlap membership needs both frames to contain the point") {
  RigidTransform shift;
  shift.t_row = 0.0;
  shift.t_col = 60.0;
  CHECK(in_overlap({50.0, 80.0}, 100, 100, shift, 100, 100));
  CHECK_FALSE(in_overlap({50.0, 40.0}, 100, 100, shift, 100, 100));
  CHECK_FALSE(in_overlap({50.0, 120.0}, 100, 100, shift, 100, 100));
  CHECK_FALSE(in_overlap({-1.0, 80.0}, 100, 100, shift, 100, 100));
}

TEST_CASE("aligning an image with itself is the identity") {
  SynthConfig cfg = pair_config(0.0, 0.0, 0.0);
  Rng rng(411);
  const SynthSubject subject = gen_subject(cfg, rng);
  const GrayImage enhanced = enhance_image(subject.master);
  const AlignmentState state = align_pair(enhanced, enhanced, subject.pores,
                                          subject.pores, AlignmentConfig{});
  CHECK(std::abs(state.transform.angle) <= 1e-9);
  CHECK(std::abs(state.transform.t_row) <= 1e-6);
  CHECK(std::abs(state.transform.t_col) <= 1e-6);
  CHECK(state.w <= 1e-9);
  CHECK(state.correspondences.size() == subject.pores.size());
}

TEST_CASE("a known relative transform is recovered on a synthetic pair") {
  SynthConfig cfg = pair_config(0.13, 12.0, 0.5);
  int recovered = 0;
  for (std::uint64_t seed : {421, 422, 423, 424, 425}) {
    Rng rng(seed);
    const SynthSubject subject = gen_subject(cfg, rng);
    const SynthImpression& a = subject.impressions[0];
    const SynthImpression& b = subject.impressions[1];
    const RigidTransform truth = compose(a.transform, b.transform.inverse());
    const AlignmentState state =
        align_pair(enhance_image(a.image), enhance_image(b.image), a.pores,
                   b.pores, AlignmentConfig{});
    const Point center{(cfg.rows - 1) / 2.0, (cfg.cols - 1) / 2.0};
    const double trans_err =
        std::sqrt(sq_dist(state.transform.apply(center), truth.apply(center)));
    if (angle_diff(state.transform.angle, truth.angle) < 0.01 &&
        trans_err < 1.0) {
      ++recovered;
    }
    CHECK(state.w <= state.w_initial + 1e-12);
    CHECK(std::isfinite(state.w));
  }
  CHECK(recovered >= 4);
}

TEST_CASE("equal labels depict the same planted pore across images") {
  SynthConfig cfg = pair_config(0.08, 6.0, 0.3);
  cfg.impressions_per_session = 3;
  Rng rng(431);
  const SynthSubject subject = gen_subject(cfg, rng);

  std::vector<std::vector<GrayImage>> images(1);
  std::vector<std::vector<std::vector<Point>>> pores(1);
  for (const SynthImpression& imp : subject.impressions) {
    images[0].push_back(imp.image);
    pores[0].push_back(imp.pores);
  }

  IdentityDatasetConfig idc;
  std::vector<std::string> warnings;
  const AnnotatedPatchSet set =
      build_identity_dataset_from_pores(images, pores, idc, &warnings);
  CHECK(warnings.empty());
  REQUIRE(set.label_count() > 0);
  REQUIRE(set.patches.size() == set.labels.size());
  REQUIRE(set.patches.size() == set.subjects.size());
  REQUIRE(set.patches.size() == set.source_images.size());
  for (std::size_t k = 0; k < set.patches.size(); ++k) {
    CHECK(set.patches[k].rows() == 33);
    CHECK(set.patches[k].cols() == 33);
    CHECK(set.subjects[k] == 0);
  }

  // Replicate the deterministic alignment to recover each label's source
  // pore, then require the projected patch centers to stay within 2 px of
  // the planted pore's true position in every image.
  const int n_images = static_cast<int>(images[0].size());
  std::vector<RigidTransform> est(static_cast<std::size_t>(n_images));
  std::vector<GrayImage> enhanced;
  for (const GrayImage& img : images[0]) enhanced.push_back(enhance_image(img));
  for (int i = 1; i < n_images; ++i) {
    est[static_cast<std::size_t>(i)] =
        align_pair(enhanced[0], enhanced[static_cast<std::size_t>(i)],
                   pores[0][0], pores[0][static_cast<std::size_t>(i)],
                   idc.align)
            .transform;
  }
  const auto in_all = [&](const Point& u) {
    for (int i = 0; i < n_images; ++i) {
      const Point v = est[static_cast<std::size_t>(i)].inverse().apply(u);
      if (v.row < 0.0 || v.row > cfg.rows - 1.0 || v.col < 0.0 ||
          v.col > cfg.cols - 1.0) {
        return false;
      }
    }
    return true;
  };
  const auto nearest_master = [&](const Point& m) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < subject.pores.size(); ++j) {
      if (sq_dist(m, subject.pores[j]) < sq_dist(m, subject.pores[best]))
        best = j;
    }
    return best;
  };

  int label = 0;
  std::vector<bool> covered(subject.pores.size(), false);
  for (int src = 0; src < n_images; ++src) {
    const SynthImpression& simp =
        subject.impressions[static_cast<std::size_t>(src)];
    for (const Point& g : pores[0][static_cast<std::size_t>(src)]) {
      const Point u = est[static_cast<std::size_t>(src)].apply(g);
      if (!in_all(u)) continue;
      const std::size_t planted = nearest_master(simp.transform.inverse().apply(g));
      covered[planted] = true;
      for (int dst = 0; dst < n_images; ++dst) {
        const Point v = est[static_cast<std::size_t>(dst)].inverse().apply(u);
        const Point truth =
            subject.impressions[static_cast<std::size_t>(dst)].transform.apply(
                subject.pores[planted]);
        CHECK(std::sqrt(sq_dist(v, truth)) <= 2.0);
      }
      ++label;
    }
  }
  CHECK(label == set.label_count());

  // Every planted pore visible in all impressions must be annotated.
  int common = 0, annotated = 0;
  for (std::size_t j = 0; j < subject.pores.size(); ++j) {
    bool everywhere = true;
    for (const SynthImpression& imp : subject.impressions) {
      const Point v = imp.transform.apply(subject.pores[j]);
      if (v.row < 1.0 || v.row > cfg.rows - 2.0 || v.col < 1.0 ||
          v.col > cfg.cols - 2.0) {
        everywhere = false;
      }
    }
    if (!everywhere) continue;
    ++common;
    if (covered[j]) ++annotated;
  }
  REQUIRE(common > 10);
  CHECK(annotated >= static_cast<int>(0.9 * static_cast<double>(common)));
}

TEST_CASE("annotation labels are disjoint across subjects") {
  SynthConfig cfg = pair_config(0.05, 4.0, 0.3);
  IdentityDatasetConfig idc;
  std::vector<std::vector<GrayImage>> images(2);
  std::vector<std::vector<std::vector<Point>>> pores(2);
  for (int s = 0; s < 2; ++s) {
    Rng rng(441 + static_cast<std::uint64_t>(s));
    const SynthSubject subject = gen_subject(cfg, rng);
    for (const SynthImpression& imp : subject.impressions) {
      images[static_cast<std::size_t>(s)].push_back(imp.image);
      pores[static_cast<std::size_t>(s)].push_back(imp.pores);
    }
  }
  const AnnotatedPatchSet set =
      build_identity_dataset_from_pores(images, pores, idc, nullptr);
  REQUIRE(set.label_count() > 0);

  std::vector<std::vector<int>> labels_by_subject(2);
  for (std::size_t k = 0; k < set.labels.size(); ++k) {
    labels_by_subject[static_cast<std::size_t>(set.subjects[k])].push_back(
        set.labels[k]);
  }
  REQUIRE(!labels_by_subject[0].empty());
  REQUIRE(!labels_by_subject[1].empty());
  for (int label : labels_by_subject[0]) {
    for (int other : labels_by_subject[1]) {
      CHECK(label != other);
    }
  }
}

TEST_CASE("patch sets round-trip through the container") {
  namespace fs = std::filesystem;
  AnnotatedPatchSet set;
  Rng rng(451);
  for (int i = 0; i < 5; ++i) {
    GrayImage patch(33, 33);
    for (int r = 0; r < 33; ++r)
      for (int c = 0; c < 33; ++c)
        patch(r, c) = static_cast<float>(rng.uniform());
    set.patches.push_back(std::move(patch));
    set.labels.push_back(i / 2);
    set.subjects.push_back(i % 2);
    set.source_images.push_back(i);
  }
  const fs::path dir = fs::temp_directory_path() / "porekit_aligner_test";
  fs::create_directories(dir);
  const std::string path = (dir / "patches.pknn").string();
  save_patch_set(path, set);
  const AnnotatedPatchSet loaded = load_patch_set(path);
  REQUIRE(loaded.patches.size() == set.patches.size());
  CHECK(loaded.labels == set.labels);
  CHECK(loaded.subjects == set.subjects);
  CHECK(loaded.source_images == set.source_images);
  CHECK(loaded.label_count() == set.label_count());
  for (std::size_t i = 0; i < set.patches.size(); ++i) {
    CHECK((loaded.patches[i].array() == set.patches[i].array()).all());
  }
  fs::remove_all(dir);
}
