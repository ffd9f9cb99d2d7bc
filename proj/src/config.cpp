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

#include "porekit/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <system_error>

#include "porekit/common.hpp"

namespace porekit {

namespace {

std::string format_i64(std::int64_t v) { return std::to_string(v); }
std::string format_u64(std::uint64_t v) { return std::to_string(v); }

void push_aug(RunConfig& c, const std::string& section,
              const AugmentationConfig& aug) {
  c.entries.emplace_back(section + ".aug_sigma_translation",
                         format_double(aug.sigma_translation));
  c.entries.emplace_back(section + ".aug_sigma_rotation",
                         format_double(aug.sigma_rotation));
  c.entries.emplace_back(section + ".aug_sigma_brightness",
                         format_double(aug.sigma_brightness));
  c.entries.emplace_back(section + ".aug_sigma_contrast",
                         format_double(aug.sigma_contrast));
}

AugmentationConfig read_aug(const RunConfig& c, const std::string& section) {
  AugmentationConfig aug;
  aug.sigma_translation = c.get_double(section + ".aug_sigma_translation");
  aug.sigma_rotation = c.get_double(section + ".aug_sigma_rotation");
  aug.sigma_brightness = c.get_double(section + ".aug_sigma_brightness");
  aug.sigma_contrast = c.get_double(section + ".aug_sigma_contrast");
  return aug;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  PK_CHECK(res.ec == std::errc(), ErrorKind::kNumeric,
           "cannot format double");
  return std::string(buf, res.ptr);
}

RunConfig RunConfig::defaults() {
  RunConfig c;
  const SynthConfig sy;
  const DetectorTrainConfig dt;
  const AlignmentConfig al;
  const IdentityDatasetConfig an;
  const DescNetConfig dn;
  auto put = [&c](const std::string& k, const std::string& v) {
    c.entries.emplace_back(k, v);
  };

  put("seed", format_u64(1));

  put("synth.rows", format_i64(sy.rows));
  put("synth.cols", format_i64(sy.cols));
  put("synth.ridge_period", format_double(sy.ridge_period));
  put("synth.pore_density", format_double(sy.pore_density));
  put("synth.pore_radius_min", format_double(sy.pore_radius_min));
  put("synth.pore_radius_max", format_double(sy.pore_radius_max));
  put("synth.pore_min_separation", format_double(sy.pore_min_separation));
  put("synth.noise_sigma", format_double(sy.noise_sigma));
  put("synth.sessions", format_i64(sy.sessions));
  put("synth.impressions_per_session",
      format_i64(sy.impressions_per_session));
  put("synth.theta_spread", format_double(sy.theta_spread));
  put("synth.translation_spread", format_double(sy.translation_spread));
  put("synth.jitter_sigma", format_double(sy.jitter_sigma));
  put("synth.margin", format_i64(sy.margin));

  put("detector.prob_threshold", format_double(dt.detect.prob_threshold));
  put("detector.nms_iou_threshold",
      format_double(dt.detect.nms_iou_threshold));
  put("detector.box_size", format_i64(dt.detect.box_size));
  put("detector.patch_size", format_i64(dt.detect.patch_size));
  put("detector.label_box", format_i64(dt.detect.label_box));
  put("detector.lr", format_double(dt.sgd.base_lr));
  put("detector.lr_decay", format_double(dt.sgd.decay));
  put("detector.lr_decay_every", format_i64(dt.sgd.decay_every));
  put("detector.weight_decay", format_double(dt.sgd.weight_decay));
  put("detector.batch_size", format_i64(dt.batch_size));
  put("detector.dropout", format_double(dt.dropout));
  put("detector.max_steps", format_i64(dt.max_steps));
  put("detector.eval_every", format_i64(dt.eval_every));
  put("detector.patience", format_i64(dt.patience));
  push_aug(c, "detector", dt.aug);

  put("align.lambda", format_double(al.lambda));
  put("align.epsilon", format_double(al.epsilon));
  put("align.max_iterations", format_i64(al.max_iterations));
  put("align.sift_ratio", format_double(al.sift_ratio));

  put("annotate.patch_size", format_i64(an.patch_size));
  put("enhance.median_kernel", format_i64(an.median_kernel));
  put("enhance.clahe_clip", format_double(an.clahe_clip));

  put("descnet.batch_size", format_i64(dn.batch_size));
  put("descnet.per_identity", format_i64(dn.per_identity));
  put("descnet.margin", format_double(dn.margin));
  put("descnet.dropout", format_double(dn.dropout));
  put("descnet.lr", format_double(dn.sgd.base_lr));
  put("descnet.lr_decay", format_double(dn.sgd.decay));
  put("descnet.lr_decay_every", format_i64(dn.sgd.decay_every));
  put("descnet.weight_decay", format_double(dn.sgd.weight_decay));
  put("descnet.max_steps", format_i64(dn.max_steps));
  put("descnet.eval_every", format_i64(dn.eval_every));
  put("descnet.patience", format_i64(dn.patience));
  put("descnet.val_ratio", format_double(dn.val_ratio));
  put("descnet.val_impostor_per_genuine",
      format_i64(dn.val_impostor_per_genuine));
  push_aug(c, "descnet", dn.aug);

  put("sift.scale", format_double(8.0));
  put("dp.patch_size", format_i64(32));
  put("match.ratio", format_double(0.7));

  put("experiment.detection_train_images", format_i64(15));
  put("experiment.detection_val_images", format_i64(5));
  put("experiment.detection_test_images", format_i64(10));
  put("experiment.alignment_pairs", format_i64(20));
  put("experiment.align_theta_spread",
      format_double(0.2617993877991494));
  put("experiment.align_translation_spread", format_double(30.0));
  put("experiment.align_jitter_sigma", format_double(0.5));
  put("experiment.recognition_train_subjects", format_i64(10));
  put("experiment.recognition_test_subjects", format_i64(20));
  put("experiment.descnet_train_fraction", format_double(0.6));
  return c;
}

bool RunConfig::has(const std::string& key) const {
  for (const auto& kv : entries)
    if (kv.first == key) return true;
  return false;
}

const std::string& RunConfig::raw(const std::string& key) const {
  for (const auto& kv : entries)
    if (kv.first == key) return kv.second;
  fail(ErrorKind::kInvalidArgument, "unknown config key: " + key);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  for (auto& kv : entries) {
    if (kv.first == key) {
      kv.second = value;
      return;
    }
  }
  fail(ErrorKind::kInvalidArgument, "unknown config key: " + key);
}

void RunConfig::set_int(const std::string& key, std::int64_t value) {
  set(key, format_i64(value));
}

void RunConfig::set_u64(const std::string& key, std::uint64_t value) {
  set(key, format_u64(value));
}

void RunConfig::set_double(const std::string& key, double value) {
  set(key, format_double(value));
}

std::int64_t RunConfig::get_int(const std::string& key) const {
  const std::string& s = raw(key);
  std::int64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  PK_CHECK(res.ec == std::errc() && res.ptr == s.data() + s.size(),
           ErrorKind::kFormat, "config key " + key + ": bad integer '" + s +
                                   "'");
  return v;
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  const std::string& s = raw(key);
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  PK_CHECK(res.ec == std::errc() && res.ptr == s.data() + s.size(),
           ErrorKind::kFormat, "config key " + key + ": bad integer '" + s +
                                   "'");
  return v;
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& s = raw(key);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  PK_CHECK(end == s.c_str() + s.size() && !s.empty(), ErrorKind::kFormat,
           "config key " + key + ": bad number '" + s + "'");
  return v;
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& kv : entries) {
    out += kv.first;
    out += '=';
    out += kv.second;
    out += '\n';
  }
  return out;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  PK_CHECK(in.good(), ErrorKind::kFormat, "cannot open config: " + path);
  RunConfig cfg = RunConfig::defaults();
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    PK_CHECK(eq != std::string::npos, ErrorKind::kFormat,
             path + ":" + std::to_string(lineno) + ": expected key=value");
    cfg.set(line.substr(0, eq), line.substr(eq + 1));
  }
  return cfg;
}

void save_run_config(const std::string& path, const RunConfig& cfg) {
  std::ofstream out(path, std::ios::binary);
  PK_CHECK(out.good(), ErrorKind::kFormat, "cannot write config: " + path);
  out << cfg.to_text();
  PK_CHECK(out.good(), ErrorKind::kFormat, "write failed: " + path);
}

SynthConfig synth_config(const RunConfig& c) {
  SynthConfig s;
  s.rows = static_cast<int>(c.get_int("synth.rows"));
  s.cols = static_cast<int>(c.get_int("synth.cols"));
  s.ridge_period = c.get_double("synth.ridge_period");
  s.pore_density = c.get_double("synth.pore_density");
  s.pore_radius_min = c.get_double("synth.pore_radius_min");
  s.pore_radius_max = c.get_double("synth.pore_radius_max");
  s.pore_min_separation = c.get_double("synth.pore_min_separation");
  s.noise_sigma = c.get_double("synth.noise_sigma");
  s.sessions = static_cast<int>(c.get_int("synth.sessions"));
  s.impressions_per_session =
      static_cast<int>(c.get_int("synth.impressions_per_session"));
  s.theta_spread = c.get_double("synth.theta_spread");
  s.translation_spread = c.get_double("synth.translation_spread");
  s.jitter_sigma = c.get_double("synth.jitter_sigma");
  s.margin = static_cast<int>(c.get_int("synth.margin"));
  return s;
}

DetectorConfig detector_config(const RunConfig& c) {
  DetectorConfig d;
  d.prob_threshold = c.get_double("detector.prob_threshold");
  d.nms_iou_threshold = c.get_double("detector.nms_iou_threshold");
  d.box_size = static_cast<int>(c.get_int("detector.box_size"));
  d.patch_size = static_cast<int>(c.get_int("detector.patch_size"));
  d.label_box = static_cast<int>(c.get_int("detector.label_box"));
  return d;
}

DetectorTrainConfig detector_train_config(const RunConfig& c) {
  DetectorTrainConfig t;
  t.sgd.base_lr = c.get_double("detector.lr");
  t.sgd.decay = c.get_double("detector.lr_decay");
  t.sgd.decay_every = c.get_int("detector.lr_decay_every");
  t.sgd.weight_decay = c.get_double("detector.weight_decay");
  t.batch_size = static_cast<int>(c.get_int("detector.batch_size"));
  t.dropout = c.get_double("detector.dropout");
  t.max_steps = static_cast<int>(c.get_int("detector.max_steps"));
  t.eval_every = static_cast<int>(c.get_int("detector.eval_every"));
  t.patience = static_cast<int>(c.get_int("detector.patience"));
  t.aug = read_aug(c, "detector");
  t.detect = detector_config(c);
  return t;
}

AlignmentConfig alignment_config(const RunConfig& c) {
  AlignmentConfig a;
  a.lambda = c.get_double("align.lambda");
  a.epsilon = c.get_double("align.epsilon");
  a.max_iterations = static_cast<int>(c.get_int("align.max_iterations"));
  a.sift_ratio = c.get_double("align.sift_ratio");
  return a;
}

IdentityDatasetConfig identity_dataset_config(const RunConfig& c) {
  IdentityDatasetConfig i;
  i.align = alignment_config(c);
  i.detect = detector_config(c);
  i.patch_size = static_cast<int>(c.get_int("annotate.patch_size"));
  i.median_kernel = static_cast<int>(c.get_int("enhance.median_kernel"));
  i.clahe_clip = c.get_double("enhance.clahe_clip");
  return i;
}

DescNetConfig descnet_config(const RunConfig& c) {
  DescNetConfig d;
  d.batch_size = static_cast<int>(c.get_int("descnet.batch_size"));
  d.per_identity = static_cast<int>(c.get_int("descnet.per_identity"));
  d.margin = c.get_double("descnet.margin");
  d.dropout = c.get_double("descnet.dropout");
  d.sgd.base_lr = c.get_double("descnet.lr");
  d.sgd.decay = c.get_double("descnet.lr_decay");
  d.sgd.decay_every = c.get_int("descnet.lr_decay_every");
  d.sgd.weight_decay = c.get_double("descnet.weight_decay");
  d.max_steps = static_cast<int>(c.get_int("descnet.max_steps"));
  d.eval_every = static_cast<int>(c.get_int("descnet.eval_every"));
  d.patience = static_cast<int>(c.get_int("descnet.patience"));
  d.val_ratio = c.get_double("descnet.val_ratio");
  d.val_impostor_per_genuine =
      static_cast<int>(c.get_int("descnet.val_impostor_per_genuine"));
  d.aug = read_aug(c, "descnet");
  return d;
}

}  // namespace porekit
