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

#include "porekit/descnet.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "porekit/common.hpp"
#include "porekit/losses.hpp"
#include "porekit/recognition.hpp"

namespace porekit {

namespace {

// Embed a list of 32x32 patches in infer mode, chunked to bound memory.
std::vector<Eigen::VectorXf> embed_patches(const Sequential<float>& model,
                                           const std::vector<GrayImage>& patches) {
  std::vector<Eigen::VectorXf> out;
  out.reserve(patches.size());
  const int chunk = 64;
  for (std::size_t start = 0; start < patches.size();
       start += static_cast<std::size_t>(chunk)) {
    const int n = static_cast<int>(
        std::min<std::size_t>(chunk, patches.size() - start));
    TensorF input({n, 32, 32, 1});
    for (int i = 0; i < n; ++i) {
      const GrayImage& p = patches[start + static_cast<std::size_t>(i)];
      PK_CHECK(p.rows() == 32 && p.cols() == 32, ErrorKind::kInvalidShape,
               "descriptor input patches must be 32x32");
      for (int r = 0; r < 32; ++r) {
        for (int c = 0; c < 32; ++c) {
          input.at(i, r, c, 0) = p(r, c);
        }
      }
    }
    const TensorF emb = model.forward(input, Mode::kInfer);
    const std::int64_t dim = emb.size() / n;
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXf v(dim);
      for (std::int64_t d = 0; d < dim; ++d) {
        v(static_cast<Eigen::Index>(d)) = emb[i * dim + d];
      }
      out.push_back(std::move(v));
    }
  }
  return out;
}

std::map<int, std::vector<int>> group_by_label(const AnnotatedPatchSet& set) {
  std::map<int, std::vector<int>> groups;
  for (std::size_t i = 0; i < set.labels.size(); ++i) {
    groups[set.labels[i]].push_back(static_cast<int>(i));
  }
  return groups;
}

}  // namespace

Sequential<float> build_descnet(double dropout_rate) {
  Sequential<float> net;
  net.conv(3, 3, 1, 32, 1, 1, Padding::kSame).batchnorm(32).relu()
      .conv(3, 3, 32, 32, 1, 1, Padding::kSame).batchnorm(32).relu()
      .conv(3, 3, 32, 64, 2, 2, Padding::kSame).batchnorm(64).relu()
      .conv(3, 3, 64, 64, 1, 1, Padding::kSame).batchnorm(64).relu()
      .conv(3, 3, 64, 128, 2, 2, Padding::kSame).batchnorm(128).relu()
      .conv(3, 3, 128, 128, 1, 1, Padding::kSame).batchnorm(128).relu()
      .dropout(dropout_rate)
      .conv(8, 8, 128, 128).batchnorm(128)
      .l2norm();
  return net;
}

GrayImage crop_patch_32(const GrayImage& patch) {
  PK_CHECK(patch.rows() >= 33 && patch.cols() >= 33, ErrorKind::kInvalidShape,
           "expected a 33x33 source patch");
  GrayImage out(32, 32);
  for (int r = 0; r < 32; ++r) {
    for (int c = 0; c < 32; ++c) {
      out(r, c) = patch(r, c);
    }
  }
  return out;
}

IdentityBatch sample_identity_batch(const AnnotatedPatchSet& set,
                                    const DescNetConfig& cfg,
                                    const AugmentationConfig& aug, Rng& rng) {
  PK_CHECK(cfg.per_identity >= 1 && cfg.batch_size % cfg.per_identity == 0,
           ErrorKind::kInvalidArgument,
           "batch_size must be a multiple of per_identity");
  const int identities = cfg.batch_size / cfg.per_identity;
  const std::map<int, std::vector<int>> groups = group_by_label(set);
  PK_CHECK(static_cast<int>(groups.size()) >= identities,
           ErrorKind::kInvalidData,
           "dataset has fewer than " + std::to_string(identities) +
               " identities");

  std::vector<int> all_labels;
  all_labels.reserve(groups.size());
  for (const auto& [label, idx] : groups) all_labels.push_back(label);

  // Partial Fisher-Yates draw of distinct labels.
  for (int i = 0; i < identities; ++i) {
    const int j = i + static_cast<int>(rng.uniform_int(
                          static_cast<std::uint64_t>(all_labels.size() - i)));
    std::swap(all_labels[static_cast<std::size_t>(i)],
              all_labels[static_cast<std::size_t>(j)]);
  }

  IdentityBatch batch;
  batch.patches = TensorF({cfg.batch_size, 32, 32, 1});
  batch.labels.reserve(static_cast<std::size_t>(cfg.batch_size));
  int slot = 0;
  for (int i = 0; i < identities; ++i) {
    const int label = all_labels[static_cast<std::size_t>(i)];
    const std::vector<int>& pool = groups.at(label);
    std::vector<int> chosen;
    if (static_cast<int>(pool.size()) >= cfg.per_identity) {
      std::vector<int> shuffled = pool;
      for (int k = 0; k < cfg.per_identity; ++k) {
        const int j = k + static_cast<int>(rng.uniform_int(
                              static_cast<std::uint64_t>(shuffled.size() - k)));
        std::swap(shuffled[static_cast<std::size_t>(k)],
                  shuffled[static_cast<std::size_t>(j)]);
        chosen.push_back(shuffled[static_cast<std::size_t>(k)]);
      }
    } else {
      for (int k = 0; k < cfg.per_identity; ++k) {
        chosen.push_back(pool[static_cast<std::size_t>(
            rng.uniform_int(static_cast<std::uint64_t>(pool.size())))]);
      }
    }
    for (int patch_idx : chosen) {
      GrayImage patch =
          crop_patch_32(set.patches[static_cast<std::size_t>(patch_idx)]);
      patch = augment_patch(patch, aug, rng);
      for (int r = 0; r < 32; ++r) {
        for (int c = 0; c < 32; ++c) {
          batch.patches.at(slot, r, c, 0) = patch(r, c);
        }
      }
      batch.labels.push_back(label);
      ++slot;
    }
  }
  return batch;
}

double patch_level_eer(const Sequential<float>& model,
                       const AnnotatedPatchSet& set, int impostor_per_genuine,
                       Rng& rng) {
  std::vector<GrayImage> cropped;
  cropped.reserve(set.patches.size());
  for (const GrayImage& p : set.patches) cropped.push_back(crop_patch_32(p));
  const std::vector<Eigen::VectorXf> emb = embed_patches(model, cropped);

  // Similarity score: negated embedding distance, so genuine pairs score
  // higher and the accept-if-score>=threshold convention applies unchanged.
  std::vector<double> genuine;
  const std::map<int, std::vector<int>> groups = group_by_label(set);
  for (const auto& [label, idx] : groups) {
    for (std::size_t a = 0; a < idx.size(); ++a) {
      for (std::size_t b = a + 1; b < idx.size(); ++b) {
        const double d =
            (emb[static_cast<std::size_t>(idx[a])].cast<double>() -
             emb[static_cast<std::size_t>(idx[b])].cast<double>())
                .norm();
        genuine.push_back(-d);
      }
    }
  }
  PK_CHECK(!genuine.empty(), ErrorKind::kInvalidData,
           "patch set has no same-label pairs");

  const std::size_t n = emb.size();
  std::vector<double> impostor;
  const std::size_t want = genuine.size() * static_cast<std::size_t>(
                               std::max(1, impostor_per_genuine));
  std::size_t guard = 0;
  while (impostor.size() < want && guard < 50 * want) {
    ++guard;
    const std::size_t a = rng.uniform_int(n);
    const std::size_t b = rng.uniform_int(n);
    if (set.labels[a] == set.labels[b]) continue;
    impostor.push_back(-(emb[a].cast<double>() - emb[b].cast<double>()).norm());
  }
  PK_CHECK(!impostor.empty(), ErrorKind::kInvalidData,
           "patch set has no cross-label pairs");
  return roc_eer(genuine, impostor).eer;
}

DescNetTrainResult train_descnet(const AnnotatedPatchSet& train_set,
                                 const AnnotatedPatchSet& val_set,
                                 const DescNetConfig& cfg, Rng& rng) {
  PK_CHECK(cfg.max_steps >= 1, ErrorKind::kInvalidArgument,
           "max_steps must be >= 1");
  for (int subject : train_set.subjects) {
    for (int val_subject : val_set.subjects) {
      PK_CHECK(subject != val_subject, ErrorKind::kInvalidData,
               "training and validation sets share subject " +
                   std::to_string(subject));
    }
  }

  DescNetTrainResult result;
  result.model = build_descnet(cfg.dropout);
  Rng init_rng = rng.fork("descnet-init");
  Rng data_rng = rng.fork("descnet-data");
  Rng drop_rng = rng.fork("descnet-dropout");
  result.model.init_params(init_rng);

  Sequential<float>& net = result.model;
  OptimizerState opt{cfg.sgd, 0};
  Sequential<float> best = net;
  int evals_without_improvement = 0;
  bool any_eval = false;

  Tape<float> tape;
  for (int step = 0; step < cfg.max_steps; ++step) {
    IdentityBatch batch = sample_identity_batch(train_set, cfg, cfg.aug, data_rng);
    const TensorF emb = net.forward(batch.patches, Mode::kTrain, &drop_rng, &tape);
    TensorF grad = TensorF::constant(emb.shape(), 0.0f);
    const TripletStats stats =
        triplet_semihard_loss(emb, batch.labels, cfg.margin, &grad);
    PK_CHECK(std::isfinite(stats.loss), ErrorKind::kNumeric,
             "non-finite training loss at step " + std::to_string(step));
    result.step_losses.push_back(stats.loss);

    net.zero_grads();
    net.backward(tape, std::move(grad));
    auto refs = net.param_refs();
    sgd_step(refs, opt);

    if ((step + 1) % cfg.eval_every == 0) {
      Rng eval_rng = rng.fork("descnet-val");
      const double eer =
          patch_level_eer(net, val_set, cfg.val_impostor_per_genuine, eval_rng);
      result.val_eers.emplace_back(step + 1, eer);
      if (!any_eval || eer < result.best_val_eer) {
        any_eval = true;
        result.best_val_eer = eer;
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
    Rng eval_rng = rng.fork("descnet-val");
    result.best_step = static_cast<int>(result.step_losses.size());
    result.best_val_eer =
        patch_level_eer(net, val_set, cfg.val_impostor_per_genuine, eval_rng);
  }
  return result;
}

std::vector<PoreEmbedding> describe_pores(const GrayImage& img,
                                          const std::vector<Point>& pores,
                                          const Sequential<float>& model) {
  std::vector<GrayImage> patches;
  patches.reserve(pores.size());
  for (const Point& p : pores) {
    patches.push_back(crop_patch_32(extract_patch(img, p, 33)));
  }
  const std::vector<Eigen::VectorXf> emb = embed_patches(model, patches);
  std::vector<PoreEmbedding> out(pores.size());
  for (std::size_t i = 0; i < pores.size(); ++i) {
    out[i].v = emb[i];
    out[i].keypoint = pores[i];
  }
  return out;
}

}  // namespace porekit
