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

#ifndef POREKIT_MODEL_IO_HPP_
#define POREKIT_MODEL_IO_HPP_

#include <string>
#include <utility>
#include <vector>

#include "porekit/network.hpp"
#include "porekit/tensor.hpp"

namespace porekit {

struct NamedTensor {
  std::string name;
  TensorF tensor;
};

// Binary tensor container, little-endian: magic "PKNN", u32 version=1,
// u32 tensor count, per tensor {u16 name length, name, u8 dtype (0=float32),
// u8 rank, rank x u64 dims, raw data}, then u32 metadata length and key=value
// lines.
struct Container {
  std::vector<NamedTensor> tensors;
  std::vector<std::pair<std::string, std::string>> metadata;

  const TensorF& find(const std::string& name) const;
  bool has(const std::string& name) const;
  std::string meta(const std::string& key, const std::string& fallback = "") const;
};

void save_container(const std::string& path, const Container& c);
Container load_container(const std::string& path);

// Model checkpoints: every named parameter of the network (trainable and
// moving statistics) as container tensors.
void save_model(Sequential<float>& net,
                const std::vector<std::pair<std::string, std::string>>& metadata,
                const std::string& path);

// Fills an already-built architecture from a container; names and shapes must
// match exactly.
void load_model_params(Sequential<float>& net, const Container& c);

}  // namespace porekit

#endif  // POREKIT_MODEL_IO_HPP_
