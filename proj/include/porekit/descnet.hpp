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

#ifndef POREKIT_DESCNET_HPP_
#define POREKIT_DESCNET_HPP_

#include <utility>
#include <vector>

#include "porekit/aligner.hpp"
#include "porekit/image.hpp"
#include "porekit/image_ops.hpp"
#include "porekit/matching.hpp"
#include "porekit/network.hpp"
#include "porekit/optimizer.hpp"
#include "porekit/rng.hpp"

namespace porekit {

using PoreEmbedding = Descriptor;

struct DescNetConfig {
  int batch_size = 252;
  int per_identity = 6;
  double margin = 2.0;
  double dropout = 0.3;
  SgdConfig sgd{0.1, 1.0, 1, 0.0};  // constant learning rate 0.1
  int max_steps = 2000;
  int eval_every = 100;
  int patience = 10;
  double val_ratio = 0.7;  // matcher ratio for the validation EER
  int val_impostor_per_genuine = 4;
  AugmentationConfig aug;
};

struct DescNetTrainResult {
  Sequential<float> model;
  std::vector<double> step_losses;
  std::vector<std::pair<int, double>> val_eers;
  int best_step = 0;
  double best_val_eer = 1.0;
};

struct IdentityBatch {
  TensorF patches;  // [B,32,32,1]
  std::vector<int> labels;
};

// The pore-descriptor stack: six same-padded conv-bn-relu blocks
// (32,32,64/s2,64,128/s2,128), dropout, a valid 8x8 conv to 128 channels with
// batchnorm, then l2 normalization. A 32x32 input maps to one unit-norm
// 128-d embedding. Weights are left at zero; call init_params before use.
Sequential<float> build_descnet(double dropout_rate = 0.3);

// Identity-balanced batch: cfg.batch_size/cfg.per_identity distinct labels,
// cfg.per_identity patches each (drawn with replacement when a label has
// fewer). The 33x33 source patches lose their last row/column and are then
// augmented.
IdentityBatch sample_identity_batch(const AnnotatedPatchSet& set,
                                    const DescNetConfig& cfg,
                                    const AugmentationConfig& aug, Rng& rng);

// Triplet-loss training with early stopping on a patch-level validation EER:
// genuine scores are same-label embedding similarities, impostor scores come
// from a fixed seeded sample of different-label pairs, both scored with the
// recognition machinery. Returns the best-validation parameters.
DescNetTrainResult train_descnet(const AnnotatedPatchSet& train_set,
                                 const AnnotatedPatchSet& val_set,
                                 const DescNetConfig& cfg, Rng& rng);

// Patch-level EER of a model on a labeled patch set; the helper behind early
// stopping, also used to compare trained vs untrained models.
double patch_level_eer(const Sequential<float>& model,
                       const AnnotatedPatchSet& set, int impostor_per_genuine,
                       Rng& rng);

// 33x33 raw patches at the pore centers, cropped to 32x32 and embedded in
// infer mode. No enhancement is applied.
std::vector<PoreEmbedding> describe_pores(const GrayImage& img,
                                          const std::vector<Point>& pores,
                                          const Sequential<float>& model);

// Crop a 33x33 patch to 32x32 by discarding the last row and column.
GrayImage crop_patch_32(const GrayImage& patch);

}  // namespace porekit

#endif  // POREKIT_DESCNET_HPP_
