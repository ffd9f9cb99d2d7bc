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

#ifndef POREKIT_LOSSES_HPP_
#define POREKIT_LOSSES_HPP_

#include <algorithm>
#include <cmath>
#include <vector>

#include "porekit/tensor.hpp"

namespace porekit {

// Mean binary cross-entropy with predictions clamped to [1e-7, 1 - 1e-7].
template <typename S>
double bce_loss(const Tensor<S>& pred, const Tensor<S>& target) {
  PK_CHECK(pred.same_shape(target), ErrorKind::kInvalidShape,
           "bce_loss shape mismatch: " + pred.shape_str() + " vs " +
               target.shape_str());
  PK_CHECK(pred.size() > 0, ErrorKind::kInvalidArgument, "bce_loss on empty");
  double acc = 0.0;
  for (std::int64_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp(static_cast<double>(pred[i]), 1e-7, 1.0 - 1e-7);
    const double y = static_cast<double>(target[i]);
    acc += y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  return -acc / static_cast<double>(pred.size());
}

// Gradient of mean BCE with respect to the logits feeding the final sigmoid:
// (p - y) / N. Injecting this below the sigmoid replaces the numerically
// fragile dL/dp * dp/dz chain.
template <typename S>
Tensor<S> bce_logit_grad(const Tensor<S>& pred, const Tensor<S>& target) {
  PK_CHECK(pred.same_shape(target), ErrorKind::kInvalidShape,
           "bce_logit_grad shape mismatch");
  Tensor<S> grad(pred.shape());
  const S inv_n = S(1) / static_cast<S>(pred.size());
  grad.array() = (pred.array() - target.array()) * inv_n;
  return grad;
}

struct TripletStats {
  double loss = 0.0;
  int pairs = 0;   // ordered anchor-positive pairs
  int active = 0;  // pairs with a positive hinge term
};

// Triplet loss with semi-hard negative mining over Euclidean (non-squared)
// distances. Every ordered same-label pair (a, p) is an anchor-positive pair;
// its negative is the closest embedding of another label that is still farther
// than the positive, falling back to the farthest negative overall when none
// is. The loss is the mean of max(0, d_ap - d_an + margin) over all pairs.
// When grad is non-null the gradient wrt the embeddings is accumulated there.
template <typename S>
TripletStats triplet_semihard_loss(const Tensor<S>& emb,
                                   const std::vector<int>& labels,
                                   double margin, Tensor<S>* grad = nullptr) {
  PK_CHECK(emb.rank() >= 2, ErrorKind::kInvalidShape,
           "triplet loss expects [batch, dim] embeddings");
  const int B = emb.dim(0);
  PK_CHECK(static_cast<int>(labels.size()) == B, ErrorKind::kInvalidArgument,
           "triplet loss labels/batch mismatch");
  const std::int64_t D = emb.size() / B;

  std::vector<double> dist(static_cast<std::size_t>(B) * B, 0.0);
  for (int i = 0; i < B; ++i) {
    const S* xi = emb.data() + i * D;
    for (int j = i + 1; j < B; ++j) {
      const S* xj = emb.data() + j * D;
      double ss = 0.0;
      for (std::int64_t k = 0; k < D; ++k) {
        const double d = double(xi[k]) - double(xj[k]);
        ss += d * d;
      }
      const double d = std::sqrt(std::max(ss, 0.0));
      dist[static_cast<std::size_t>(i) * B + j] = d;
      dist[static_cast<std::size_t>(j) * B + i] = d;
    }
  }

  std::vector<double> dgrad;
  if (grad) {
    PK_CHECK(grad->same_shape(emb), ErrorKind::kInvalidShape,
             "triplet grad shape mismatch");
    dgrad.assign(static_cast<std::size_t>(emb.size()), 0.0);
  }

  TripletStats stats;
  for (int a = 0; a < B; ++a) {
    for (int p = 0; p < B; ++p) {
      if (p == a || labels[p] != labels[a]) continue;
      ++stats.pairs;
    }
  }
  PK_CHECK(stats.pairs > 0, ErrorKind::kInvalidArgument,
           "triplet loss batch has no positive pairs");

  // Adds d(dist(i,j))/d(emb) scaled by w to the gradient accumulator.
  auto add_dist_grad = [&](int i, int j, double w) {
    const double d = dist[static_cast<std::size_t>(i) * B + j];
    if (d <= 0.0) return;
    const S* xi = emb.data() + i * D;
    const S* xj = emb.data() + j * D;
    double* gi = dgrad.data() + i * D;
    double* gj = dgrad.data() + j * D;
    const double s = w / d;
    for (std::int64_t k = 0; k < D; ++k) {
      const double diff = double(xi[k]) - double(xj[k]);
      gi[k] += s * diff;
      gj[k] -= s * diff;
    }
  };

  double loss_acc = 0.0;
  const double inv_pairs = 1.0 / static_cast<double>(stats.pairs);
  for (int a = 0; a < B; ++a) {
    bool has_negative = false;
    for (int j = 0; j < B && !has_negative; ++j) {
      has_negative = labels[j] != labels[a];
    }
    PK_CHECK(has_negative, ErrorKind::kInvalidArgument,
             "triplet loss batch has an anchor with no negatives");
    for (int p = 0; p < B; ++p) {
      if (p == a || labels[p] != labels[a]) continue;
      const double d_ap = dist[static_cast<std::size_t>(a) * B + p];
      int n_best = -1;
      double d_an = 0.0;
      // Semi-hard: nearest negative beyond the positive distance.
      for (int n = 0; n < B; ++n) {
        if (labels[n] == labels[a]) continue;
        const double d = dist[static_cast<std::size_t>(a) * B + n];
        if (d > d_ap && (n_best < 0 || d < d_an)) {
          n_best = n;
          d_an = d;
        }
      }
      if (n_best < 0) {
        // Fallback: farthest negative overall.
        for (int n = 0; n < B; ++n) {
          if (labels[n] == labels[a]) continue;
          const double d = dist[static_cast<std::size_t>(a) * B + n];
          if (n_best < 0 || d > d_an) {
            n_best = n;
            d_an = d;
          }
        }
      }
      const double term = d_ap - d_an + margin;
      if (term > 0.0) {
        loss_acc += term;
        ++stats.active;
        if (grad) {
          add_dist_grad(a, p, inv_pairs);
          add_dist_grad(a, n_best, -inv_pairs);
        }
      }
    }
  }
  stats.loss = loss_acc * inv_pairs;
  if (grad) {
    for (std::int64_t i = 0; i < emb.size(); ++i) {
      (*grad)[i] += static_cast<S>(dgrad[static_cast<std::size_t>(i)]);
    }
  }
  return stats;
}

}  // namespace porekit

#endif  // POREKIT_LOSSES_HPP_
