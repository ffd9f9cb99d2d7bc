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

#include "porekit/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "porekit/common.hpp"
#include "porekit/image_io.hpp"

namespace fs = std::filesystem;

namespace porekit {

namespace {

bool is_image_file(const fs::path& p) {
  const std::string ext = p.extension().string();
  return ext == ".pgm" || ext == ".png";
}

std::vector<fs::path> sorted_entries(const fs::path& dir, bool dirs_only) {
  std::vector<fs::path> out;
  for (const fs::directory_entry& e : fs::directory_iterator(dir)) {
    if (dirs_only ? e.is_directory() : e.is_regular_file()) {
      out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

void check_unique_triples(const DatasetManifest& manifest) {
  std::set<std::tuple<int, int, int>> seen;
  std::string offenders;
  for (const ManifestEntry& e : manifest.entries) {
    if (!seen.insert({e.subject, e.session, e.index}).second) {
      offenders += " (" + std::to_string(e.subject) + "," +
                   std::to_string(e.session) + "," + std::to_string(e.index) +
                   ")";
    }
  }
  PK_CHECK(offenders.empty(), ErrorKind::kInvalidData,
           "duplicate manifest entries:" + offenders);
}

void check_files_exist(const DatasetManifest& manifest) {
  std::string missing;
  for (const ManifestEntry& e : manifest.entries) {
    if (!fs::exists(manifest.image_file(e))) missing += " " + e.image_path;
    if (!e.gt_path.empty() && !fs::exists(manifest.gt_file(e)))
      missing += " " + e.gt_path;
  }
  PK_CHECK(missing.empty(), ErrorKind::kInvalidData,
           "missing dataset files:" + missing);
}

DatasetManifest ingest_groundtruth(const std::string& root) {
  DatasetManifest manifest;
  manifest.root = root;
  std::vector<fs::path> images;
  for (const fs::path& p : sorted_entries(root, false)) {
    if (is_image_file(p)) images.push_back(p);
  }
  PK_CHECK(images.size() == 30, ErrorKind::kInvalidData,
           "groundtruth layout expects exactly 30 images, found " +
               std::to_string(images.size()));
  for (std::size_t i = 0; i < images.size(); ++i) {
    ManifestEntry e;
    e.image_path = images[i].filename().string();
    fs::path gt = images[i];
    gt.replace_extension(".txt");
    PK_CHECK(fs::exists(gt), ErrorKind::kInvalidData,
             "missing ground truth for " + e.image_path);
    e.gt_path = gt.filename().string();
    e.subject = static_cast<int>(i);
    e.session = 1;
    e.index = 0;
    e.split = i < 15 ? "train" : (i < 20 ? "val" : "test");
    manifest.entries.push_back(e);
  }
  return manifest;
}

DatasetManifest ingest_db(const std::string& root,
                          std::vector<std::string>* warnings) {
  DatasetManifest manifest;
  manifest.root = root;
  const std::vector<fs::path> subject_dirs = sorted_entries(root, true);
  int subject_no = 0;
  for (const fs::path& sdir : subject_dirs) {
    const std::vector<fs::path> session_dirs = sorted_entries(sdir, true);
    if (session_dirs.size() < 2) {
      if (warnings != nullptr) {
        warnings->push_back("subject directory " + sdir.filename().string() +
                            " lacks two sessions, excluded");
      }
      continue;
    }
    int session_no = 0;
    for (const fs::path& sess : session_dirs) {
      ++session_no;
      int index = 0;
      for (const fs::path& img : sorted_entries(sess, false)) {
        if (!is_image_file(img)) continue;
        ManifestEntry e;
        e.image_path = fs::relative(img, root).string();
        fs::path gt = img;
        gt.replace_extension(".txt");
        if (fs::exists(gt)) e.gt_path = fs::relative(gt, root).string();
        e.subject = subject_no;
        e.session = session_no;
        e.index = index++;
        manifest.entries.push_back(e);
      }
    }
    ++subject_no;
  }
  return manifest;
}

}  // namespace

std::string DatasetManifest::image_file(const ManifestEntry& e) const {
  return (fs::path(root) / e.image_path).string();
}

std::string DatasetManifest::gt_file(const ManifestEntry& e) const {
  return (fs::path(root) / e.gt_path).string();
}

std::vector<ManifestEntry> DatasetManifest::with_split(
    const std::string& split) const {
  std::vector<ManifestEntry> out;
  for (const ManifestEntry& e : entries) {
    if (e.split == split) out.push_back(e);
  }
  return out;
}

DatasetManifest ingest(const std::string& root, const std::string& layout,
                       std::vector<std::string>* warnings) {
  PK_CHECK(fs::is_directory(root), ErrorKind::kInvalidData,
           "dataset root is not a directory: " + root);
  DatasetManifest manifest;
  if (layout == "groundtruth") {
    manifest = ingest_groundtruth(root);
  } else if (layout == "db") {
    manifest = ingest_db(root, warnings);
  } else if (layout == "synthetic") {
    manifest = load_manifest_csv((fs::path(root) / "manifest.csv").string());
  } else {
    fail(ErrorKind::kInvalidArgument, "unknown dataset layout: " + layout);
  }
  check_unique_triples(manifest);
  check_files_exist(manifest);
  return manifest;
}

void save_manifest_csv(const std::string& path,
                       const DatasetManifest& manifest) {
  std::ofstream out(path);
  PK_CHECK(out.good(), ErrorKind::kFormat, "cannot open for write: " + path);
  out << "image,gt,subject,session,index,split\n";
  for (const ManifestEntry& e : manifest.entries) {
    PK_CHECK(e.image_path.find(',') == std::string::npos &&
                 e.gt_path.find(',') == std::string::npos,
             ErrorKind::kFormat, "manifest paths must not contain commas");
    out << e.image_path << ',' << e.gt_path << ',' << e.subject << ','
        << e.session << ',' << e.index << ',' << e.split << '\n';
  }
  PK_CHECK(out.good(), ErrorKind::kFormat, "write failed: " + path);
}

DatasetManifest load_manifest_csv(const std::string& path) {
  std::ifstream in(path);
  PK_CHECK(in.good(), ErrorKind::kFormat, "cannot open manifest: " + path);
  DatasetManifest manifest;
  manifest.root = fs::path(path).parent_path().string();
  std::string line;
  PK_CHECK(static_cast<bool>(std::getline(in, line)), ErrorKind::kFormat,
           "empty manifest: " + path);
  PK_CHECK(line == "image,gt,subject,session,index,split", ErrorKind::kFormat,
           "unexpected manifest header in " + path);
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    ManifestEntry e;
    std::string subject, session, index;
    const bool ok = static_cast<bool>(std::getline(ss, e.image_path, ',')) &&
                    static_cast<bool>(std::getline(ss, e.gt_path, ',')) &&
                    static_cast<bool>(std::getline(ss, subject, ',')) &&
                    static_cast<bool>(std::getline(ss, session, ',')) &&
                    static_cast<bool>(std::getline(ss, index, ','));
    std::getline(ss, e.split, ',');
    PK_CHECK(ok, ErrorKind::kFormat,
             "bad manifest line " + std::to_string(line_no) + " in " + path);
    try {
      e.subject = std::stoi(subject);
      e.session = std::stoi(session);
      e.index = std::stoi(index);
    } catch (const std::exception&) {
      fail(ErrorKind::kFormat,
           "bad manifest numbers at line " + std::to_string(line_no));
    }
    manifest.entries.push_back(e);
  }
  return manifest;
}

LabeledImage load_labeled_image(const DatasetManifest& manifest,
                                const ManifestEntry& entry) {
  LabeledImage li;
  li.image = load_image(manifest.image_file(entry));
  if (!entry.gt_path.empty()) {
    li.pores = load_ground_truth(manifest.gt_file(entry));
  }
  return li;
}

DatasetManifest write_detection_dataset(const std::string& root,
                                        const SynthConfig& cfg, int n_train,
                                        int n_val, int n_test, Rng& rng) {
  PK_CHECK(n_train >= 1 && n_val >= 1 && n_test >= 1,
           ErrorKind::kInvalidArgument, "all splits need at least one image");
  fs::create_directories(root);
  DatasetManifest manifest;
  manifest.root = root;
  const int total = n_train + n_val + n_test;
  for (int i = 0; i < total; ++i) {
    Rng img_rng = rng.fork("det-image-" + std::to_string(i));
    const SynthMaster master = gen_master(cfg, img_rng);
    char name[32];
    std::snprintf(name, sizeof(name), "img_%03d", i);
    ManifestEntry e;
    e.image_path = std::string(name) + ".png";
    e.gt_path = std::string(name) + ".txt";
    e.subject = i;
    e.session = 1;
    e.index = 0;
    e.split = i < n_train ? "train" : (i < n_train + n_val ? "val" : "test");
    save_image(master.image, manifest.image_file(e));
    save_ground_truth(master.pores, manifest.gt_file(e));
    manifest.entries.push_back(e);
  }
  save_manifest_csv((fs::path(root) / "manifest.csv").string(), manifest);
  return manifest;
}

DatasetManifest write_recognition_dataset(const std::string& root,
                                          const SynthConfig& cfg, int subjects,
                                          Rng& rng) {
  PK_CHECK(subjects >= 1, ErrorKind::kInvalidArgument,
           "need at least one subject");
  fs::create_directories(root);
  DatasetManifest manifest;
  manifest.root = root;
  std::ofstream transforms(fs::path(root) / "transforms.csv");
  PK_CHECK(transforms.good(), ErrorKind::kFormat,
           "cannot write transforms.csv");
  transforms << "subject,session,index,angle,t_row,t_col\n";
  char buf[160];
  for (int s = 0; s < subjects; ++s) {
    Rng subj_rng = rng.fork("subject-" + std::to_string(s));
    const SynthSubject subject = gen_subject(cfg, subj_rng);
    char sdir[32];
    std::snprintf(sdir, sizeof(sdir), "s%03d", s);
    for (std::size_t k = 0; k < subject.impressions.size(); ++k) {
      const SynthImpression& imp = subject.impressions[k];
      const int session = imp.session + 1;
      const int index =
          static_cast<int>(k) - imp.session * cfg.impressions_per_session;
      fs::create_directories(fs::path(root) / sdir / std::to_string(session));
      char name[32];
      std::snprintf(name, sizeof(name), "%02d", index);
      ManifestEntry e;
      e.image_path = (fs::path(sdir) / std::to_string(session) /
                      (std::string(name) + ".png"))
                         .string();
      e.gt_path = (fs::path(sdir) / std::to_string(session) /
                   (std::string(name) + ".txt"))
                      .string();
      e.subject = s;
      e.session = session;
      e.index = index;
      save_image(imp.image, manifest.image_file(e));
      save_ground_truth(imp.pores, manifest.gt_file(e));
      manifest.entries.push_back(e);
      std::snprintf(buf, sizeof(buf), "%d,%d,%d,%.17g,%.17g,%.17g\n", s,
                    session, index, imp.transform.angle, imp.transform.t_row,
                    imp.transform.t_col);
      transforms << buf;
    }
  }
  PK_CHECK(transforms.good(), ErrorKind::kFormat,
           "write failed: transforms.csv");
  save_manifest_csv((fs::path(root) / "manifest.csv").string(), manifest);
  return manifest;
}

}  // namespace porekit
