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

#ifndef POREKIT_OPTIMIZER_HPP_
#define POREKIT_OPTIMIZER_HPP_

#include <cmath>
#include <cstdint>
#include <vector>

#include "porekit/network.hpp"

namespace porekit {

struct SgdConfig {
  double base_lr = 0.1;
  double decay = 0.96;
  std::int64_t decay_every = 2000;
  double weight_decay = 0.0;
};

struct OptimizerState {
  SgdConfig cfg;
  std::int64_t step = 0;
};

// Stepwise exponential decay: the rate drops by the decay factor once per
// decay_every steps (integer division), e.g. 0.1 * 0.96^2 = 0.09216 at step
// 4000 under the defaults.
inline double sgd_learning_rate(const SgdConfig& cfg, std::int64_t step) {
  return cfg.base_lr *
         std::pow(cfg.decay, static_cast<double>(step / cfg.decay_every));
}

// w <- w - lr * (g + weight_decay * w) on every trainable tensor, then
// advances the step counter. Gradients must be finite.
template <typename S>
void sgd_step(std::vector<ParamRef<S>>& refs, OptimizerState& state) {
  const S lr = static_cast<S>(sgd_learning_rate(state.cfg, state.step));
  const S wd = static_cast<S>(state.cfg.weight_decay);
  for (auto& ref : refs) {
    if (!ref.trainable) continue;
    PK_CHECK(ref.tensor->has_grad(), ErrorKind::kInvalidArgument,
             "sgd_step on tensor without gradient: " + ref.name);
    auto& w = ref.tensor->array();
    const auto& g = ref.tensor->grad();
    PK_CHECK(g.isFinite().all(), ErrorKind::kNumeric,
             "non-finite gradient in " + ref.name);
    w -= lr * (g + wd * w);
  }
  ++state.step;
}

}  // namespace porekit

#endif  // POREKIT_OPTIMIZER_HPP_
