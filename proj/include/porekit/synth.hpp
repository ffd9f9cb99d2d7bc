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

#ifndef POREKIT_SYNTH_HPP_
#define POREKIT_SYNTH_HPP_

#include <vector>

#include "porekit/image.hpp"
#include "porekit/rng.hpp"

namespace porekit {

struct SynthConfig {
  int rows = 128;
  int cols = 128;
  double ridge_period = 12.0;
  // Pores per pixel of ridge length; the expected count is
  // density * usable_area / ridge_period.
  double pore_density = 0.04;
  double pore_radius_min = 1.5;
  double pore_radius_max = 3.5;
  double pore_min_separation = 7.0;
  double noise_sigma = 0.02;
  int sessions = 2;
  int impressions_per_session = 3;
  // Each impression draws its rigid transform uniformly from
  // [-theta_spread, theta_spread] x [-translation_spread, translation_spread]^2
  // about the image center.
  double theta_spread = 0.17;
  double translation_spread = 10.0;
  double jitter_sigma = 0.5;  // per-pore elastic jitter, truncated at 3 sigma
  int margin = 10;            // keep pores this far from the borders
};

struct SynthImpression {
  GrayImage image;
  RigidTransform transform;  // maps master coordinates into this impression
  std::vector<Point> pores;  // projected ground truth, jitter included
  int session = 0;
};

struct SynthMaster {
  GrayImage image;
  std::vector<Point> pores;
};

struct SynthSubject {
  GrayImage master;
  std::vector<Point> pores;
  std::vector<SynthImpression> impressions;
};

// Ridge pattern from a smooth random orientation field (an oriented sinusoid
// carrier with low-frequency phase perturbations) with bright Gaussian pores
// planted on the ridge lines, additive Gaussian noise, and values clamped to
// [0,1]. Returns the exact pore centers.
SynthMaster gen_master(const SynthConfig& cfg, Rng& rng);

// A master plus `sessions * impressions_per_session` impressions, each
// rendered analytically under its own rigid transform with per-pore elastic
// jitter and fresh noise. True transforms are stored for alignment tests.
SynthSubject gen_subject(const SynthConfig& cfg, Rng& rng);

}  // namespace porekit

#endif  // POREKIT_SYNTH_HPP_
