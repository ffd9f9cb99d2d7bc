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
#include <vector>

#include "porekit/detector.hpp"
#include "porekit/image.hpp"
#include "porekit/rng.hpp"
#include "porekit/synth.hpp"

using namespace porekit;

TEST_CASE("pore count tracks density times usable ridge length") {
  SynthConfig cfg;
  const double usable_rows = cfg.rows - 2.0 * cfg.margin;
  const double usable_cols = cfg.cols - 2.0 * cfg.margin;
  const double expected =
      cfg.pore_density * usable_rows * usable_cols / cfg.ridge_period;
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    Rng rng(seed);
    const SynthMaster master = gen_master(cfg, rng);
    const double n = static_cast<double>(master.pores.size());
    CHECK(n >= 0.9 * expected);
    CHECK(n <= 1.1 * expected);
  }
}

TEST_CASE("default pore radii give areas within the valid band") {
  const SynthConfig cfg;
  const double area_min = M_PI * cfg.pore_radius_min * cfg.pore_radius_min;
  const double area_max = M_PI * cfg.pore_radius_max * cfg.pore_radius_max;
  CHECK(area_min >= 5.0);
  CHECK(area_max <= 40.0);
}

TEST_CASE("planted pores respect the minimum separation") {
  SynthConfig cfg;
  Rng rng(7);
  const SynthMaster master = gen_master(cfg, rng);
  REQUIRE(master.pores.size() >= 2);
  const double min_sq = cfg.pore_min_separation * cfg.pore_min_separation;
  for (std::size_t i = 0; i < master.pores.size(); ++i) {
    for (std::size_t j = i + 1; j < master.pores.size(); ++j) {
      CHECK(sq_dist(master.pores[i], master.pores[j]) >= min_sq - 1e-9);
    }
  }
}

TEST_CASE("pure ridge pattern spans a wide intensity range") {
  SynthConfig cfg;
  cfg.noise_sigma = 0.0;
  cfg.pore_density = 0.0;
  Rng rng(11);
  const SynthMaster master = gen_master(cfg, rng);
  CHECK(master.pores.empty());
  CHECK(master.image.array().minCoeff() <= 0.2f);
  CHECK(master.image.array().maxCoeff() >= 0.8f);
}

TEST_CASE("pixel values stay inside the unit interval") {
  SynthConfig cfg;
  cfg.noise_sigma = 0.1;
  Rng rng(13);
  const SynthSubject subject = gen_subject(cfg, rng);
  CHECK(subject.master.array().minCoeff() >= 0.0f);
  CHECK(subject.master.array().maxCoeff() <= 1.0f);
  for (const SynthImpression& imp : subject.impressions) {
    CHECK(imp.image.array().minCoeff() >= 0.0f);
    CHECK(imp.image.array().maxCoeff() <= 1.0f);
  }
}

TEST_CASE("generation is deterministic under the seed") {
  SynthConfig cfg;
  Rng a(21), b(21), c(22);
  const SynthMaster ma = gen_master(cfg, a);
  const SynthMaster mb = gen_master(cfg, b);
  const SynthMaster mc = gen_master(cfg, c);
  REQUIRE(ma.pores.size() == mb.pores.size());
  for (std::size_t i = 0; i < ma.pores.size(); ++i) {
    CHECK(ma.pores[i].row == mb.pores[i].row);
    CHECK(ma.pores[i].col == mb.pores[i].col);
  }
  CHECK((ma.image.array() == mb.image.array()).all());
  CHECK_FALSE((ma.image.array() == mc.image.array()).all());
}

TEST_CASE("zero spread, jitter, and noise reproduce the master exactly") {
  SynthConfig cfg;
  cfg.noise_sigma = 0.0;
  cfg.theta_spread = 0.0;
  cfg.translation_spread = 0.0;
  cfg.jitter_sigma = 0.0;
  Rng rng(31);
  const SynthSubject subject = gen_subject(cfg, rng);
  REQUIRE(subject.impressions.size() ==
          static_cast<std::size_t>(cfg.sessions * cfg.impressions_per_session));
  for (const SynthImpression& imp : subject.impressions) {
    CHECK((imp.image.array() == subject.master.array()).all());
    REQUIRE(imp.pores.size() == subject.pores.size());
    for (std::size_t i = 0; i < imp.pores.size(); ++i) {
      CHECK(imp.pores[i].row == doctest::Approx(subject.pores[i].row));
      CHECK(imp.pores[i].col == doctest::Approx(subject.pores[i].col));
    }
  }
}

TEST_CASE("impression ground truth is the in-bounds jittered projection") {
  SynthConfig cfg;
  Rng rng(41);
  const SynthSubject subject = gen_subject(cfg, rng);
  const double slack = 3.0 * cfg.jitter_sigma + 1e-9;
  const double dist_slack = 3.0 * cfg.jitter_sigma * std::sqrt(2.0) + 1e-9;
  for (const SynthImpression& imp : subject.impressions) {
    std::size_t in_bounds = 0;
    std::size_t matched = 0;
    for (const Point& p : subject.pores) {
      const Point q = imp.transform.apply(p);
      if (q.row < -slack || q.row > cfg.rows - 1.0 + slack || q.col < -slack ||
          q.col > cfg.cols - 1.0 + slack) {
        continue;
      }
      ++in_bounds;
      for (const Point& g : imp.pores) {
        if (std::sqrt(sq_dist(q, g)) <= dist_slack) {
          ++matched;
          break;
        }
      }
    }
    CHECK(imp.pores.size() <= in_bounds);
    CHECK(matched >= imp.pores.size());
  }
}

TEST_CASE("impression sessions are assigned in configured blocks") {
  SynthConfig cfg;
  cfg.sessions = 3;
  cfg.impressions_per_session = 2;
  Rng rng(43);
  const SynthSubject subject = gen_subject(cfg, rng);
  REQUIRE(subject.impressions.size() == 6);
  for (std::size_t k = 0; k < subject.impressions.size(); ++k) {
    CHECK(subject.impressions[k].session ==
          static_cast<int>(k) / cfg.impressions_per_session);
  }
}

TEST_CASE("planted pores satisfy the patch label rule") {
  SynthConfig cfg;
  Rng rng(47);
  const SynthMaster master = gen_master(cfg, rng);
  for (const Point& p : master.pores) {
    CHECK(label_patch(p, master.pores) == 1.0f);
  }
}

TEST_CASE("gen_subject rejects a session-free configuration") {
  SynthConfig cfg;
  cfg.sessions = 0;
  Rng rng(53);
  CHECK_THROWS_AS(gen_subject(cfg, rng), Error);
}
