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

#include "porekit/synth.hpp"

#include <algorithm>
#include <cmath>

#include "porekit/common.hpp"

namespace porekit {

namespace {

constexpr double kTwoPi = 6.283185307179586;
constexpr double kHalfPi = 1.5707963267948966;
constexpr double kBackground = 0.88;
constexpr double kRidgeAmplitude = 0.32;

struct Wave {
  double amp, fr, fc, phase;
};

struct PoreSpec {
  Point center;
  double radius = 0.0;
  double amp = 0.0;
};

// Analytic description of one finger: a phase field whose level sets are the
// ridges, an elliptical visibility mask, and the planted pores. Impressions
// re-evaluate the same field under a rigid transform, so warping introduces
// no resampling blur.
struct MasterField {
  int rows = 0, cols = 0;
  double period = 12.0;
  double alpha = 0.0;  // base ridge-normal direction
  std::vector<Wave> waves;
  std::vector<PoreSpec> pores;

  double psi(double r, double c) const {
    double p = (kTwoPi / period) * (std::sin(alpha) * r + std::cos(alpha) * c);
    for (const Wave& w : waves) {
      p += w.amp * std::sin(kTwoPi * (w.fr * r + w.fc * c) + w.phase);
    }
    return p;
  }

  void grad_psi(double r, double c, double* gr, double* gc) const {
    *gr = (kTwoPi / period) * std::sin(alpha);
    *gc = (kTwoPi / period) * std::cos(alpha);
    for (const Wave& w : waves) {
      const double d = w.amp * std::cos(kTwoPi * (w.fr * r + w.fc * c) + w.phase) * kTwoPi;
      *gr += d * w.fr;
      *gc += d * w.fc;
    }
  }

  double mask(double r, double c) const {
    const double er = (r - (rows - 1) / 2.0) / (0.46 * rows);
    const double ec = (c - (cols - 1) / 2.0) / (0.46 * cols);
    const double e = er * er + ec * ec;
    double m = std::clamp((1.0 - e) / 0.15, 0.0, 1.0);
    return m * m * (3.0 - 2.0 * m);
  }

  double ridge_value(double r, double c) const {
    const double m = mask(r, c);
    const double base = 0.5 - kRidgeAmplitude * std::sin(psi(r, c));
    return m * base + (1.0 - m) * kBackground;
  }
};

MasterField make_field(const SynthConfig& cfg, Rng& rng) {
  MasterField f;
  f.rows = cfg.rows;
  f.cols = cfg.cols;
  f.period = cfg.ridge_period;
  f.alpha = rng.uniform(0.0, kTwoPi / 2.0);
  for (int k = 0; k < 3; ++k) {
    Wave w;
    const double dir = rng.uniform(0.0, kTwoPi);
    const double wavelength = cfg.ridge_period * rng.uniform(4.0, 8.0);
    w.fr = std::sin(dir) / wavelength;
    w.fc = std::cos(dir) / wavelength;
    w.amp = rng.uniform(0.3, 0.7);
    w.phase = rng.uniform(0.0, kTwoPi);
    f.waves.push_back(w);
  }
  return f;
}

// Project a candidate onto the nearest ridge center line (psi = pi/2 mod 2pi)
// by Newton steps along the phase gradient.
bool project_to_ridge(const MasterField& f, double* r, double* c) {
  for (int it = 0; it < 4; ++it) {
    const double offset = std::remainder(f.psi(*r, *c) - kHalfPi, kTwoPi);
    double gr, gc;
    f.grad_psi(*r, *c, &gr, &gc);
    const double g2 = gr * gr + gc * gc;
    if (g2 < 1e-12) return false;
    *r -= offset * gr / g2;
    *c -= offset * gc / g2;
  }
  return std::abs(std::remainder(f.psi(*r, *c) - kHalfPi, kTwoPi)) < 0.05;
}

void place_pores(const SynthConfig& cfg, MasterField* f, Rng& rng) {
  const double usable_rows = cfg.rows - 2.0 * cfg.margin;
  const double usable_cols = cfg.cols - 2.0 * cfg.margin;
  if (usable_rows <= 0.0 || usable_cols <= 0.0) return;
  const long target = std::lround(cfg.pore_density * usable_rows * usable_cols /
                                  cfg.ridge_period);
  const double min_sep2 = cfg.pore_min_separation * cfg.pore_min_separation;
  const long max_attempts = 400 * std::max<long>(target, 1);
  for (long attempt = 0;
       attempt < max_attempts && static_cast<long>(f->pores.size()) < target;
       ++attempt) {
    double r = rng.uniform(cfg.margin, cfg.rows - 1.0 - cfg.margin);
    double c = rng.uniform(cfg.margin, cfg.cols - 1.0 - cfg.margin);
    if (!project_to_ridge(*f, &r, &c)) continue;
    if (r < cfg.margin || r > cfg.rows - 1.0 - cfg.margin || c < cfg.margin ||
        c > cfg.cols - 1.0 - cfg.margin) {
      continue;
    }
    if (f->mask(r, c) < 0.99) continue;
    bool separated = true;
    for (const PoreSpec& p : f->pores) {
      if (sq_dist(p.center, {r, c}) < min_sep2) {
        separated = false;
        break;
      }
    }
    if (!separated) continue;
    PoreSpec p;
    p.center = {r, c};
    p.radius = rng.uniform(cfg.pore_radius_min, cfg.pore_radius_max);
    p.amp = rng.uniform(0.5, 0.65);
    f->pores.push_back(p);
  }
}

// Renders the field under `transform` (master -> output coordinates) with the
// given per-pore jitter, then adds fresh noise. Returns the image and the
// in-bounds projected ground truth.
SynthImpression render(const MasterField& f, const SynthConfig& cfg,
                       const RigidTransform& transform,
                       const std::vector<Point>& jitter, Rng& noise_rng) {
  SynthImpression imp;
  imp.transform = transform;
  const RigidTransform inv = transform.inverse();
  GrayImage img(cfg.rows, cfg.cols);
  for (int r = 0; r < cfg.rows; ++r) {
    for (int c = 0; c < cfg.cols; ++c) {
      const Point y = inv.apply({static_cast<double>(r), static_cast<double>(c)});
      img(r, c) = static_cast<float>(f.ridge_value(y.row, y.col));
    }
  }

  for (std::size_t i = 0; i < f.pores.size(); ++i) {
    const PoreSpec& p = f.pores[i];
    Point q = transform.apply(p.center);
    q.row += jitter[i].row;
    q.col += jitter[i].col;
    const double sigma = p.radius / 1.6;
    const double amp = p.amp * f.mask(p.center.row, p.center.col);
    const int reach = static_cast<int>(std::ceil(4.0 * sigma));
    const int r0 = std::max(0, static_cast<int>(std::floor(q.row)) - reach);
    const int r1 = std::min(cfg.rows - 1, static_cast<int>(std::ceil(q.row)) + reach);
    const int c0 = std::max(0, static_cast<int>(std::floor(q.col)) - reach);
    const int c1 = std::min(cfg.cols - 1, static_cast<int>(std::ceil(q.col)) + reach);
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        const double dr = r - q.row, dc = c - q.col;
        img(r, c) += static_cast<float>(
            amp * std::exp(-(dr * dr + dc * dc) / (2.0 * sigma * sigma)));
      }
    }
    if (q.row >= 0.0 && q.row <= cfg.rows - 1.0 && q.col >= 0.0 &&
        q.col <= cfg.cols - 1.0) {
      imp.pores.push_back(q);
    }
  }

  if (cfg.noise_sigma > 0.0) {
    for (int r = 0; r < cfg.rows; ++r) {
      for (int c = 0; c < cfg.cols; ++c) {
        img(r, c) += static_cast<float>(noise_rng.normal(0.0, cfg.noise_sigma));
      }
    }
  }
  img.array() = img.array().cwiseMax(0.0f).cwiseMin(1.0f);
  imp.image = std::move(img);
  return imp;
}

RigidTransform sample_transform(const SynthConfig& cfg, Rng& rng) {
  const double theta = rng.uniform(-cfg.theta_spread, cfg.theta_spread);
  const double dr = rng.uniform(-cfg.translation_spread, cfg.translation_spread);
  const double dc = rng.uniform(-cfg.translation_spread, cfg.translation_spread);
  const double cr = (cfg.rows - 1) / 2.0, cc = (cfg.cols - 1) / 2.0;
  RigidTransform t;
  t.angle = theta;
  // Rotation about the image center followed by the translation.
  t.t_row = cr - (std::cos(theta) * cr - std::sin(theta) * cc) + dr;
  t.t_col = cc - (std::sin(theta) * cr + std::cos(theta) * cc) + dc;
  return t;
}

}  // namespace

SynthMaster gen_master(const SynthConfig& cfg, Rng& rng) {
  PK_CHECK(cfg.rows >= 32 && cfg.cols >= 32, ErrorKind::kInvalidArgument,
           "synthetic images must be at least 32x32");
  PK_CHECK(cfg.ridge_period > 2.0, ErrorKind::kInvalidArgument,
           "ridge period must exceed 2 pixels");
  Rng field_rng = rng.fork("synth-field");
  Rng pore_rng = rng.fork("synth-pores");
  Rng noise_rng = rng.fork("synth-noise-master");
  MasterField field = make_field(cfg, field_rng);
  place_pores(cfg, &field, pore_rng);

  const std::vector<Point> no_jitter(field.pores.size(), Point{0.0, 0.0});
  SynthImpression master =
      render(field, cfg, RigidTransform{}, no_jitter, noise_rng);
  SynthMaster out;
  out.image = std::move(master.image);
  out.pores = std::move(master.pores);
  return out;
}

SynthSubject gen_subject(const SynthConfig& cfg, Rng& rng) {
  PK_CHECK(cfg.sessions >= 1, ErrorKind::kInvalidArgument,
           "sessions must be >= 1");
  PK_CHECK(cfg.impressions_per_session >= 1, ErrorKind::kInvalidArgument,
           "impressions_per_session must be >= 1");
  PK_CHECK(cfg.rows >= 32 && cfg.cols >= 32, ErrorKind::kInvalidArgument,
           "synthetic images must be at least 32x32");
  Rng field_rng = rng.fork("synth-field");
  Rng pore_rng = rng.fork("synth-pores");
  Rng master_noise = rng.fork("synth-noise-master");
  Rng imp_rng = rng.fork("synth-impressions");
  MasterField field = make_field(cfg, field_rng);
  place_pores(cfg, &field, pore_rng);

  SynthSubject subject;
  const std::vector<Point> no_jitter(field.pores.size(), Point{0.0, 0.0});
  SynthImpression master =
      render(field, cfg, RigidTransform{}, no_jitter, master_noise);
  subject.master = std::move(master.image);
  subject.pores = std::move(master.pores);

  for (int s = 0; s < cfg.sessions; ++s) {
    for (int k = 0; k < cfg.impressions_per_session; ++k) {
      const RigidTransform t = sample_transform(cfg, imp_rng);
      std::vector<Point> jitter(field.pores.size());
      for (Point& j : jitter) {
        j.row = imp_rng.normal_trunc3(0.0, cfg.jitter_sigma);
        j.col = imp_rng.normal_trunc3(0.0, cfg.jitter_sigma);
      }
      SynthImpression imp = render(field, cfg, t, jitter, imp_rng);
      imp.session = s;
      subject.impressions.push_back(std::move(imp));
    }
  }
  return subject;
}

}  // namespace porekit
