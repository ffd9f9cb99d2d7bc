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

#include "porekit/aligner.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

#include "porekit/common.hpp"
#include "porekit/image_ops.hpp"
#include "porekit/model_io.hpp"
#include "porekit/sift.hpp"

namespace porekit {

namespace {

double mean_sq_residual(const std::vector<Point>& p, const std::vector<Point>& q,
                        const RigidTransform& t) {
  double acc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    acc += sq_dist(p[k], t.apply(q[k]));
  }
  return acc / static_cast<double>(p.size());
}

bool same_correspondences(const std::vector<Correspondence>& a,
                          const std::vector<Correspondence>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].index_a != b[i].index_a || a[i].index_b != b[i].index_b)
      return false;
  }
  return true;
}

}  // namespace

int AnnotatedPatchSet::label_count() const {
  std::set<int> uniq(labels.begin(), labels.end());
  return static_cast<int>(uniq.size());
}

RigidTransform horn_align(const std::vector<Point>& p,
                          const std::vector<Point>& q) {
  PK_CHECK(p.size() == q.size(), ErrorKind::kInvalidArgument,
           "horn_align needs index-aligned point lists");
  PK_CHECK(p.size() >= 2, ErrorKind::kInvalidArgument,
           "horn_align needs at least 2 correspondences");
  const double n = static_cast<double>(p.size());
  double pr = 0.0, pc = 0.0, qr = 0.0, qc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    pr += p[k].row;
    pc += p[k].col;
    qr += q[k].row;
    qc += q[k].col;
  }
  pr /= n;
  pc /= n;
  qr /= n;
  qc /= n;

  double dot = 0.0, cross = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double ar = p[k].row - pr, ac = p[k].col - pc;
    const double br = q[k].row - qr, bc = q[k].col - qc;
    dot += ar * br + ac * bc;
    cross += ac * br - ar * bc;
  }
  PK_CHECK(std::sqrt(dot * dot + cross * cross) > 1e-12, ErrorKind::kNumeric,
           "degenerate configuration: points coincident");
  RigidTransform t;
  t.angle = std::atan2(cross, dot);
  const double c = std::cos(t.angle), s = std::sin(t.angle);
  t.t_row = pr - (c * qr - s * qc);
  t.t_col = pc - (s * qr + c * qc);
  return t;
}

double combined_distance(double d_desc, const Point& p1, const Point& p2,
                         const RigidTransform& t, double w,
                         const AlignmentConfig& cfg) {
  PK_CHECK(w >= 0.0, ErrorKind::kInvalidArgument,
           "mean squared residual must be non-negative");
  return d_desc + (cfg.lambda / (w + cfg.epsilon)) * sq_dist(p1, t.apply(p2));
}

bool in_overlap(const Point& p, int rows1, int cols1, const RigidTransform& t,
                int rows2, int cols2) {
  if (p.row < 0.0 || p.row > rows1 - 1.0 || p.col < 0.0 || p.col > cols1 - 1.0)
    return false;
  const Point back = t.inverse().apply(p);
  return back.row >= 0.0 && back.row <= rows2 - 1.0 && back.col >= 0.0 &&
         back.col <= cols2 - 1.0;
}

AlignmentState align_pair(const GrayImage& img1, const GrayImage& img2,
                          const std::vector<Point>& pores1,
                          const std::vector<Point>& pores2,
                          const AlignmentConfig& cfg) {
  PK_CHECK(pores1.size() >= 2 && pores2.size() >= 2, ErrorKind::kInvalidData,
           "alignment needs at least 2 pores per image");
  PK_CHECK(cfg.max_iterations >= 1, ErrorKind::kInvalidArgument,
           "max_iterations must be >= 1");
  const std::vector<Descriptor> d1 = sift_describe(img1, pores1);
  const std::vector<Descriptor> d2 = sift_describe(img2, pores2);

  std::vector<Correspondence> corr =
      match_ratio_mutual(d1, d2, cfg.sift_ratio);
  PK_CHECK(corr.size() >= 2, ErrorKind::kInvalidData,
           "alignment failed: fewer than 2 initial correspondences");

  AlignmentState state;
  {
    std::vector<Point> p, q;
    for (const Correspondence& c : corr) {
      p.push_back(pores1[static_cast<std::size_t>(c.index_a)]);
      q.push_back(pores2[static_cast<std::size_t>(c.index_b)]);
    }
    state.transform = horn_align(p, q);
    state.w = mean_sq_residual(p, q, state.transform);
    state.w_initial = state.w;
    state.correspondences = corr;
    state.iteration = 0;
  }

  for (int it = 1; it < cfg.max_iterations; ++it) {
    // Keypoints inside the current overlap, image-2 points judged through
    // their projection into image 1.
    std::vector<int> keep1, keep2;
    for (std::size_t a = 0; a < pores1.size(); ++a) {
      if (in_overlap(pores1[a], img1.rows(), img1.cols(), state.transform,
                     img2.rows(), img2.cols())) {
        keep1.push_back(static_cast<int>(a));
      }
    }
    for (std::size_t b = 0; b < pores2.size(); ++b) {
      if (in_overlap(state.transform.apply(pores2[b]), img1.rows(),
                     img1.cols(), state.transform, img2.rows(), img2.cols())) {
        keep2.push_back(static_cast<int>(b));
      }
    }
    if (keep1.size() < 2 || keep2.size() < 2) break;

    Eigen::MatrixXd dist(keep1.size(), keep2.size());
    for (std::size_t i = 0; i < keep1.size(); ++i) {
      const auto a = static_cast<std::size_t>(keep1[i]);
      for (std::size_t j = 0; j < keep2.size(); ++j) {
        const auto b = static_cast<std::size_t>(keep2[j]);
        const double d_desc =
            (d1[a].v.cast<double>() - d2[b].v.cast<double>()).norm();
        dist(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            combined_distance(d_desc, pores1[a], pores2[b], state.transform,
                              state.w, cfg);
      }
    }
    std::vector<Correspondence> next =
        match_from_distances(dist, cfg.sift_ratio);
    for (Correspondence& c : next) {
      c.index_a = keep1[static_cast<std::size_t>(c.index_a)];
      c.index_b = keep2[static_cast<std::size_t>(c.index_b)];
    }
    if (next.size() < 2 || same_correspondences(next, state.correspondences))
      break;

    std::vector<Point> p, q;
    for (const Correspondence& c : next) {
      p.push_back(pores1[static_cast<std::size_t>(c.index_a)]);
      q.push_back(pores2[static_cast<std::size_t>(c.index_b)]);
    }
    RigidTransform t;
    try {
      t = horn_align(p, q);
    } catch (const Error&) {
      break;
    }
    // Accept the refit only while the residual keeps shrinking. A clean seed
    // fitted to few points can sit below the noise floor of the full set; in
    // that case refinement has nothing left to offer and stopping preserves
    // a monotone w.
    const double w = mean_sq_residual(p, q, t);
    if (w > state.w) break;
    state.transform = t;
    state.w = w;
    state.correspondences = std::move(next);
    state.iteration = it;
  }
  return state;
}

AnnotatedPatchSet build_identity_dataset_from_pores(
    const std::vector<std::vector<GrayImage>>& subjects,
    const std::vector<std::vector<std::vector<Point>>>& pores,
    const IdentityDatasetConfig& cfg, std::vector<std::string>* warnings) {
  PK_CHECK(subjects.size() == pores.size(), ErrorKind::kInvalidArgument,
           "subjects and pore lists must be parallel");
  const auto warn = [&](const std::string& msg) {
    if (warnings != nullptr) warnings->push_back(msg);
  };

  AnnotatedPatchSet set;
  int next_label = 0;
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    const std::vector<GrayImage>& images = subjects[s];
    const std::vector<std::vector<Point>>& img_pores = pores[s];
    PK_CHECK(images.size() == img_pores.size(), ErrorKind::kInvalidArgument,
             "images and pore lists must be parallel");
    if (images.size() < 2) {
      warn("subject " + std::to_string(s) + ": fewer than 2 images, skipped");
      continue;
    }

    std::vector<GrayImage> enhanced;
    enhanced.reserve(images.size());
    for (const GrayImage& img : images) {
      enhanced.push_back(
          enhance_image(img, cfg.median_kernel, cfg.clahe_clip));
    }

    // Reference-star alignment to the subject's first image. aligned[i]
    // maps image-i coordinates into the reference frame.
    std::vector<std::pair<int, RigidTransform>> aligned;
    aligned.emplace_back(0, RigidTransform{});
    for (std::size_t i = 1; i < images.size(); ++i) {
      try {
        const AlignmentState st =
            align_pair(enhanced[0], enhanced[i], img_pores[0], img_pores[i],
                       cfg.align);
        aligned.emplace_back(static_cast<int>(i), st.transform);
      } catch (const Error& e) {
        warn("subject " + std::to_string(s) + " image " + std::to_string(i) +
             ": alignment failed (" + e.what() + "), image skipped");
      }
    }
    if (aligned.size() < 2) {
      warn("subject " + std::to_string(s) +
           ": fewer than 2 alignable images, subject skipped");
      continue;
    }

    const auto in_all_overlaps = [&](const Point& u) {
      if (u.row < 0.0 || u.row > images[0].rows() - 1.0 || u.col < 0.0 ||
          u.col > images[0].cols() - 1.0) {
        return false;
      }
      for (const auto& [idx, t] : aligned) {
        if (idx == 0) continue;
        const Point v = t.inverse().apply(u);
        const GrayImage& img = images[static_cast<std::size_t>(idx)];
        if (v.row < 0.0 || v.row > img.rows() - 1.0 || v.col < 0.0 ||
            v.col > img.cols() - 1.0) {
          return false;
        }
      }
      return true;
    };

    for (const auto& [src, t_src] : aligned) {
      for (const Point& pore : img_pores[static_cast<std::size_t>(src)]) {
        const Point u = t_src.apply(pore);
        if (!in_all_overlaps(u)) continue;
        const int label = next_label++;
        for (const auto& [dst, t_dst] : aligned) {
          const Point v = t_dst.inverse().apply(u);
          set.patches.push_back(extract_patch(
              images[static_cast<std::size_t>(dst)], v, cfg.patch_size));
          set.labels.push_back(label);
          set.subjects.push_back(static_cast<int>(s));
          set.source_images.push_back(dst);
        }
      }
    }
  }
  return set;
}

AnnotatedPatchSet build_identity_dataset(
    const std::vector<std::vector<GrayImage>>& subjects,
    const Sequential<float>& detector, const IdentityDatasetConfig& cfg,
    std::vector<std::string>* warnings) {
  std::vector<std::vector<std::vector<Point>>> pores(subjects.size());
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    pores[s].reserve(subjects[s].size());
    for (const GrayImage& img : subjects[s]) {
      pores[s].push_back(
          detection_centers(detect_pores(img, detector, cfg.detect)));
    }
  }
  return build_identity_dataset_from_pores(subjects, pores, cfg, warnings);
}

void save_patch_set(const std::string& path, const AnnotatedPatchSet& set) {
  const int k = static_cast<int>(set.patches.size());
  PK_CHECK(k > 0, ErrorKind::kInvalidData, "empty patch set");
  const int ps = set.patches[0].rows();
  Container box;
  NamedTensor patches;
  patches.name = "patches";
  patches.tensor = TensorF({k, ps, ps});
  NamedTensor labels, subjects, sources;
  labels.name = "labels";
  labels.tensor = TensorF({k});
  subjects.name = "subjects";
  subjects.tensor = TensorF({k});
  sources.name = "source_images";
  sources.tensor = TensorF({k});
  for (int i = 0; i < k; ++i) {
    const GrayImage& patch = set.patches[static_cast<std::size_t>(i)];
    PK_CHECK(patch.rows() == ps && patch.cols() == ps, ErrorKind::kInvalidData,
             "inconsistent patch sizes");
    for (int r = 0; r < ps; ++r) {
      for (int c = 0; c < ps; ++c) {
        patches.tensor[(static_cast<std::int64_t>(i) * ps + r) * ps + c] =
            patch(r, c);
      }
    }
    labels.tensor[i] = static_cast<float>(set.labels[static_cast<std::size_t>(i)]);
    subjects.tensor[i] =
        static_cast<float>(set.subjects[static_cast<std::size_t>(i)]);
    sources.tensor[i] =
        static_cast<float>(set.source_images[static_cast<std::size_t>(i)]);
  }
  box.tensors = {std::move(patches), std::move(labels), std::move(subjects),
                 std::move(sources)};
  box.metadata.emplace_back("patch_size", std::to_string(ps));
  save_container(path, box);
}

AnnotatedPatchSet load_patch_set(const std::string& path) {
  const Container box = load_container(path);
  const TensorF& patches = box.find("patches");
  const TensorF& labels = box.find("labels");
  const TensorF& subjects = box.find("subjects");
  const TensorF& sources = box.find("source_images");
  PK_CHECK(patches.rank() == 3, ErrorKind::kFormat,
           "patches tensor must be rank 3");
  const std::int64_t k = patches.dim(0);
  const int ps = static_cast<int>(patches.dim(1));
  PK_CHECK(labels.size() == k && subjects.size() == k && sources.size() == k,
           ErrorKind::kFormat, "patch set tensors disagree on count");
  AnnotatedPatchSet set;
  for (std::int64_t i = 0; i < k; ++i) {
    GrayImage patch(ps, ps);
    for (int r = 0; r < ps; ++r) {
      for (int c = 0; c < ps; ++c) {
        patch(r, c) = patches[(i * ps + r) * ps + c];
      }
    }
    set.patches.push_back(std::move(patch));
    set.labels.push_back(static_cast<int>(std::lround(labels[i])));
    set.subjects.push_back(static_cast<int>(std::lround(subjects[i])));
    set.source_images.push_back(static_cast<int>(std::lround(sources[i])));
  }
  return set;
}

}  // namespace porekit
