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

#ifndef POREKIT_CONFIG_HPP_
#define POREKIT_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "porekit/aligner.hpp"
#include "porekit/descnet.hpp"
#include "porekit/detector.hpp"
#include "porekit/synth.hpp"

namespace porekit {

// Flat ordered key=value configuration covering every tunable in the
// pipeline. `defaults()` materializes the full schema; `set` only accepts
// keys present there, so files written by `save` always carry every value
// and reload byte-identically (values are kept verbatim).
//
// The output directory is deliberately not part of the schema: it is a
// per-invocation argument, which keeps rerun directories byte-comparable.
struct RunConfig {
  std::vector<std::pair<std::string, std::string>> entries;

  static RunConfig defaults();

  bool has(const std::string& key) const;
  const std::string& raw(const std::string& key) const;

  void set(const std::string& key, const std::string& value);
  void set_int(const std::string& key, std::int64_t value);
  void set_u64(const std::string& key, std::uint64_t value);
  void set_double(const std::string& key, double value);

  std::int64_t get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;

  std::string to_text() const;
};

// Shortest decimal string that parses back to exactly `value`.
std::string format_double(double value);

RunConfig load_run_config(const std::string& path);
void save_run_config(const std::string& path, const RunConfig& cfg);

SynthConfig synth_config(const RunConfig& cfg);
DetectorConfig detector_config(const RunConfig& cfg);
DetectorTrainConfig detector_train_config(const RunConfig& cfg);
AlignmentConfig alignment_config(const RunConfig& cfg);
IdentityDatasetConfig identity_dataset_config(const RunConfig& cfg);
DescNetConfig descnet_config(const RunConfig& cfg);

}  // namespace porekit

#endif  // POREKIT_CONFIG_HPP_
