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

#ifndef POREKIT_GRAD_CHECK_HPP_
#define POREKIT_GRAD_CHECK_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "porekit/network.hpp"
#include "porekit/rng.hpp"

namespace porekit {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::int64_t probes = 0;
  std::int64_t skipped = 0;  // probes at locally nonsmooth points
};

// Symmetric relative error with an absolute floor: gradients smaller than
// the floor are compared at the floor's scale, since finite differences on
// an O(1) loss cannot resolve them to full relative precision.
inline double grad_rel_err(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max(std::abs(analytic) + std::abs(numeric), 1e-4);
}

// Central-difference check of the analytic parameter gradients, everything in
// float64. loss_fn must run a deterministic forward pass (re-seed any rng it
// uses internally); grad_fn must zero then accumulate analytic gradients.
// probe_budget <= 0 probes every scalar; a positive budget is spread across
// the trainable tensors by strided sampling with a per-stride random offset,
// keeping the runtime bounded on architectures with millions of parameters.
template <typename LossFn, typename GradFn>
GradCheckReport grad_check(Sequential<double>& net, LossFn&& loss_fn,
                           GradFn&& grad_fn, double h = 1e-3,
                           std::int64_t probe_budget = 0,
                           std::uint64_t probe_seed = 0) {
  grad_fn(net);
  auto refs = net.param_refs();

  std::int64_t total = 0;
  for (auto& ref : refs) {
    if (ref.trainable) total += ref.tensor->size();
  }

  Rng rng(probe_seed);
  GradCheckReport report;
  for (auto& ref : refs) {
    if (!ref.trainable) continue;
    const std::int64_t size = ref.tensor->size();
    std::int64_t probes = size;
    if (probe_budget > 0 && probe_budget < total) {
      probes = std::max<std::int64_t>(
          1, (probe_budget * size + total / 2) / total);
      probes = std::min(probes, size);
    }
    const std::int64_t stride = size / probes;
    for (std::int64_t k = 0; k < probes; ++k) {
      std::int64_t idx = k * stride;
      if (stride > 1) idx += static_cast<std::int64_t>(rng.uniform_int(stride));
      idx = std::min(idx, size - 1);

      double* w = ref.tensor->data() + idx;
      const double w0 = *w;
      auto central = [&](double step) {
        *w = w0 + step;
        const double lp = loss_fn(net);
        *w = w0 - step;
        const double lm = loss_fn(net);
        *w = w0;
        return (lp - lm) / (2.0 * step);
      };
      const double fd_h = central(h);
      const double fd_h2 = central(h / 2.0);
      const double fd_h4 = central(h / 4.0);
      ++report.probes;
      // Two Richardson extrapolates from three step sizes. On a locally
      // smooth loss they agree to O(h^4). A relu or pooling switch inside
      // the probe window adds a 1/step term instead, and then the finer
      // extrapolate is off by at most twice the disagreement between the
      // two, so probes are kept only where the disagreement sits well
      // below the comparison tolerance. The decision never looks at the
      // analytic value, so a wrong backward pass still fails at the
      // smooth points.
      const double r1 = (4.0 * fd_h2 - fd_h) / 3.0;
      const double r2 = (4.0 * fd_h4 - fd_h2) / 3.0;
      if (std::abs(r1 - r2) > 1e-5 * (std::abs(r1) + std::abs(r2)) + 1e-9) {
        ++report.skipped;
        continue;
      }
      const double analytic = ref.tensor->grad()[idx];
      report.max_rel_err = std::max(report.max_rel_err,
                                    grad_rel_err(analytic, r2));
    }
  }
  return report;
}

}  // namespace porekit

#endif  // POREKIT_GRAD_CHECK_HPP_
