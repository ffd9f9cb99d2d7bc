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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <vector>

#include "porekit/grad_check.hpp"
#include "porekit/layers.hpp"
#include "porekit/losses.hpp"
#include "porekit/model_io.hpp"
#include "porekit/network.hpp"
#include "porekit/optimizer.hpp"
#include "porekit/rng.hpp"
#include "porekit/tensor.hpp"

using namespace porekit;

namespace {

void fill_normal(TensorD& t, Rng& rng, double sigma = 1.0) {
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal(0.0, sigma);
}

// Direct convolution reference, independent of the im2col path.
TensorD conv_naive(const TensorD& x, const TensorD& k, int sy, int sx,
                   Padding pad) {
  const ConvGeometry g =
      conv_geometry(x.dim(1), x.dim(2), k.dim(0), k.dim(1), sy, sx, pad);
  TensorD out({x.dim(0), g.out_h, g.out_w, k.dim(3)});
  for (int n = 0; n < x.dim(0); ++n)
    for (int oy = 0; oy < g.out_h; ++oy)
      for (int ox = 0; ox < g.out_w; ++ox)
        for (int f = 0; f < k.dim(3); ++f) {
          double acc = 0.0;
          for (int ky = 0; ky < k.dim(0); ++ky)
            for (int kx = 0; kx < k.dim(1); ++kx)
              for (int c = 0; c < k.dim(2); ++c) {
                const int iy = oy * sy - g.pad_top + ky;
                const int ix = ox * sx - g.pad_left + kx;
                if (iy < 0 || iy >= x.dim(1) || ix < 0 || ix >= x.dim(2))
                  continue;
                acc += x.at(n, iy, ix, c) * k.at(ky, kx, c, f);
              }
          out.at(n, oy, ox, f) = acc;
        }
  return out;
}

// Central finite difference of loss() as t[idx] varies.
template <typename LossFn>
double fd_probe(TensorD& t, std::int64_t idx, double h, LossFn&& loss) {
  const double w0 = t[idx];
  t[idx] = w0 + h;
  const double lp = loss();
  t[idx] = w0 - h;
  const double lm = loss();
  t[idx] = w0;
  return (lp - lm) / (2.0 * h);
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(a) + std::abs(b), 1e-6);
}

// Weighted-sum loss makes per-element gradients distinct, which catches
// mis-routed gradients that a plain sum would hide.
struct WeightedSum {
  TensorD w;
  explicit WeightedSum(const std::vector<int>& shape, Rng& rng) : w(shape) {
    fill_normal(w, rng);
  }
  double operator()(const TensorD& y) const {
    double acc = 0.0;
    for (std::int64_t i = 0; i < y.size(); ++i) acc += w[i] * y[i];
    return acc;
  }
  TensorD grad() const { return w; }
};

// Brute-force semi-hard triplet reference: independent distance computation
// and selection logic, kept deliberately naive.
double triplet_brute_force(const TensorD& emb, const std::vector<int>& labels,
                           double margin) {
  const int B = emb.dim(0);
  const std::int64_t D = emb.size() / B;
  auto dist = [&](int i, int j) {
    double ss = 0.0;
    for (std::int64_t k = 0; k < D; ++k) {
      const double d = emb[i * D + k] - emb[j * D + k];
      ss += d * d;
    }
    return std::sqrt(ss);
  };
  std::vector<double> terms;
  for (int a = 0; a < B; ++a) {
    for (int p = 0; p < B; ++p) {
      if (a == p || labels[a] != labels[p]) continue;
      const double d_ap = dist(a, p);
      std::vector<double> harder, all_neg;
      for (int n = 0; n < B; ++n) {
        if (labels[n] == labels[a]) continue;
        const double d = dist(a, n);
        all_neg.push_back(d);
        if (d > d_ap) harder.push_back(d);
      }
      REQUIRE(!all_neg.empty());
      const double d_an = harder.empty()
                              ? *std::max_element(all_neg.begin(), all_neg.end())
                              : *std::min_element(harder.begin(), harder.end());
      terms.push_back(std::max(0.0, d_ap - d_an + margin));
    }
  }
  REQUIRE(!terms.empty());
  double acc = 0.0;
  for (double t : terms) acc += t;
  return acc / static_cast<double>(terms.size());
}

}  // namespace

TEST_CASE("tensor shape bookkeeping and cast") {
  TensorF t({2, 3, 4, 1});
  CHECK(t.size() == 24);
  CHECK(t.index4(1, 2, 3, 0) == 23);
  t.at(1, 0, 2, 0) = 0.5f;
  TensorD d = t.cast<double>();
  CHECK(d.at(1, 0, 2, 0) == doctest::Approx(0.5));
  CHECK_THROWS_AS(TensorF({2, 2}, TensorF::Buffer::Zero(5)), Error);
}

TEST_CASE("rng determinism and fork independence") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(42);
  Rng f1 = c.fork("one"), f2 = c.fork("two");
  CHECK(f1.next_u64() != f2.next_u64());
  CHECK(c.state() == 42);  // fork does not advance the parent

  Rng n(7);
  double mean = 0.0, var = 0.0;
  const int kDraws = 20000;
  std::vector<double> xs(kDraws);
  for (auto& x : xs) x = n.normal();
  for (double x : xs) mean += x;
  mean /= kDraws;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= kDraws;
  CHECK(mean == doctest::Approx(0.0).epsilon(0.05));
  CHECK(var == doctest::Approx(1.0).epsilon(0.05));
  for (int i = 0; i < 1000; ++i) {
    const double u = n.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(std::abs(n.normal_trunc3(0.0, 2.0)) <= 6.0);
  }
}

TEST_CASE("conv2d shape law for valid and same padding") {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const int in_h = 1 + static_cast<int>(rng.uniform_int(30));
    const int in_w = 1 + static_cast<int>(rng.uniform_int(30));
    const int k = 1 + 2 * static_cast<int>(rng.uniform_int(3));
    const int s = 1 + static_cast<int>(rng.uniform_int(3));
    if (in_h >= k && in_w >= k) {
      const ConvGeometry g = conv_geometry(in_h, in_w, k, k, s, s,
                                           Padding::kValid);
      CHECK(g.out_h == (in_h - k) / s + 1);
      CHECK(g.out_w == (in_w - k) / s + 1);
    }
    const ConvGeometry g = conv_geometry(in_h, in_w, k, k, s, s, Padding::kSame);
    CHECK(g.out_h == (in_h + s - 1) / s);
    CHECK(g.out_w == (in_w + s - 1) / s);
  }
  CHECK_THROWS_AS(conv_geometry(4, 4, 5, 5, 1, 1, Padding::kValid), Error);
  CHECK_THROWS_AS(conv_geometry(4, 4, 3, 3, 0, 1, Padding::kValid), Error);
}

TEST_CASE("conv2d matches direct convolution") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const int N = 1 + static_cast<int>(rng.uniform_int(3));
    const int H = 4 + static_cast<int>(rng.uniform_int(8));
    const int W = 4 + static_cast<int>(rng.uniform_int(8));
    const int C = 1 + static_cast<int>(rng.uniform_int(3));
    const int F = 1 + static_cast<int>(rng.uniform_int(4));
    const int k = 1 + 2 * static_cast<int>(rng.uniform_int(2));
    const int s = 1 + static_cast<int>(rng.uniform_int(2));
    const Padding pad = rng.uniform() < 0.5 ? Padding::kValid : Padding::kSame;

    TensorD x({N, H, W, C}), kern({k, k, C, F});
    fill_normal(x, rng);
    fill_normal(kern, rng);
    const TensorD got = conv2d(x, kern, s, s, pad);
    const TensorD want = conv_naive(x, kern, s, s, pad);
    REQUIRE(got.same_shape(want));
    for (std::int64_t i = 0; i < got.size(); ++i) {
      CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("conv2d backward matches finite differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    TensorD x({1, 6, 6, 2}), kern({3, 3, 2, 3});
    fill_normal(x, rng);
    fill_normal(kern, rng);
    const int s = seed % 2 ? 2 : 1;
    const Padding pad = seed % 3 ? Padding::kValid : Padding::kSame;

    WeightedSum loss(conv2d(x, kern, s, s, pad).shape(), rng);
    auto eval = [&] { return loss(conv2d(x, kern, s, s, pad)); };
    const ConvGrads<double> grads =
        conv2d_backward(x, kern, s, s, pad, loss.grad());

    for (std::int64_t i = 0; i < x.size(); ++i) {
      CHECK(rel_err(grads.input_grad[i], fd_probe(x, i, 1e-5, eval)) < 1e-4);
    }
    for (std::int64_t i = 0; i < kern.size(); ++i) {
      CHECK(rel_err(grads.kernel_grad[i], fd_probe(kern, i, 1e-5, eval)) < 1e-4);
    }
  }
}

TEST_CASE("maxpool forward picks window maxima and routes gradients") {
  // Distinct values on a coarse grid keep finite differences away from
  // argmax ties.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 100);
    TensorD x({4, 5, 5, 3});
    std::vector<double> values(static_cast<std::size_t>(x.size()));
    for (std::size_t i = 0; i < values.size(); ++i)
      values[i] = 0.01 * static_cast<double>(i);
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[rng.uniform_int(i)]);
    }
    for (std::int64_t i = 0; i < x.size(); ++i)
      x[i] = values[static_cast<std::size_t>(i)];

    MaxPoolCache cache;
    const TensorD y = maxpool2d(x, 3, 3, 1, 1, &cache);
    CHECK(y.dim(1) == 3);
    CHECK(y.dim(2) == 3);

    WeightedSum loss(y.shape(), rng);
    auto eval = [&] { return loss(maxpool2d(x, 3, 3, 1, 1)); };
    const TensorD gin = maxpool2d_backward(x, cache, loss.grad());
    for (std::int64_t i = 0; i < x.size(); ++i) {
      CHECK(rel_err(gin[i], fd_probe(x, i, 1e-4, eval)) < 1e-4);
    }
  }
}

TEST_CASE("batchnorm statistics, moving averages, and infer affine law") {
  Rng rng(3);
  TensorD x({8, 4, 4, 3});
  fill_normal(x, rng, 2.0);
  x.array() += 1.5;

  auto params = BatchNormParams<double>::identity_init(3);
  BatchNormCache cache;
  const TensorD y = batchnorm(x, params, Mode::kTrain, &cache);

  const std::int64_t per_channel = x.size() / 3;
  for (int c = 0; c < 3; ++c) {
    double mean = 0.0, var = 0.0;
    for (std::int64_t i = c; i < y.size(); i += 3) mean += y[i];
    mean /= static_cast<double>(per_channel);
    for (std::int64_t i = c; i < y.size(); i += 3)
      var += (y[i] - mean) * (y[i] - mean);
    var /= static_cast<double>(per_channel);
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(var == doctest::Approx(1.0).epsilon(1e-2));  // eps shrinks it slightly

    // Moving stats after one step: 0.9 * init + 0.1 * batch.
    CHECK(params.moving_mean[c] ==
          doctest::Approx(0.1 * cache.mean[c]).epsilon(1e-9));
    const double batch_var = 1.0 / (cache.invstd[c] * cache.invstd[c]) - 1e-3;
    CHECK(params.moving_var[c] ==
          doctest::Approx(0.9 + 0.1 * batch_var).epsilon(1e-9));
  }

  // Infer mode must be the per-channel affine map from moving stats.
  const TensorD z = batchnorm(x, params, Mode::kInfer);
  for (int c = 0; c < 3; ++c) {
    const double scale = 1.0 / std::sqrt(params.moving_var[c] + 1e-3);
    const double shift = -params.moving_mean[c] * scale;
    for (std::int64_t i = c; i < z.size(); i += 3) {
      CHECK(z[i] == doctest::Approx(x[i] * scale + shift).epsilon(1e-9));
    }
  }

  auto fresh = BatchNormParams<double>::without_stats(3);
  CHECK(!fresh.stats_ready());
  CHECK_THROWS_AS(batchnorm(x, fresh, Mode::kInfer), Error);
  TensorD one({1, 4, 4, 3});
  CHECK_THROWS_AS(batchnorm(one, params, Mode::kTrain), Error);
}

TEST_CASE("batchnorm backward matches finite differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 40);
    TensorD x({4, 3, 3, 2});
    fill_normal(x, rng, 1.3);
    auto params = BatchNormParams<double>::identity_init(2);
    fill_normal(params.gamma, rng, 0.3);
    params.gamma.array() += 1.0;
    fill_normal(params.beta, rng, 0.2);

    WeightedSum loss({4, 3, 3, 2}, rng);
    auto eval = [&] {
      auto p = params;  // keep moving stats untouched between probes
      return loss(batchnorm(x, p, Mode::kTrain));
    };

    auto p = params;
    BatchNormCache cache;
    batchnorm(x, p, Mode::kTrain, &cache);
    p.gamma.ensure_grad();
    p.beta.ensure_grad();
    const TensorD gin = batchnorm_backward(x, p, cache, loss.grad());

    for (std::int64_t i = 0; i < x.size(); ++i) {
      CHECK(rel_err(gin[i], fd_probe(x, i, 1e-5, eval)) < 1e-4);
    }
    for (int c = 0; c < 2; ++c) {
      CHECK(rel_err(p.gamma.grad()[c],
                    fd_probe(params.gamma, c, 1e-5, eval)) < 1e-4);
      CHECK(rel_err(p.beta.grad()[c],
                    fd_probe(params.beta, c, 1e-5, eval)) < 1e-4);
    }
  }
}

TEST_CASE("activations: values, ranges, and gradients") {
  TensorF zero({1, 1, 1, 1});
  CHECK(sigmoid(zero)[0] == doctest::Approx(0.5));
  TensorF big({1, 1, 1, 2});
  big[0] = 100.0f;
  big[1] = -100.0f;
  const TensorF sb = sigmoid(big);
  CHECK(sb[0] < 1.0f);  // clamped into the open interval
  CHECK(sb[1] > 0.0f);

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 60);
    TensorD x({2, 3, 3, 2});
    // Keep relu inputs away from the kink.
    for (std::int64_t i = 0; i < x.size(); ++i) {
      double v = rng.normal();
      if (std::abs(v) < 0.05) v = v < 0 ? v - 0.05 : v + 0.05;
      x[i] = v;
    }
    WeightedSum loss({2, 3, 3, 2}, rng);

    auto eval_relu = [&] { return loss(relu(x)); };
    const TensorD g_relu = relu_backward(x, loss.grad());
    for (std::int64_t i = 0; i < x.size(); ++i) {
      CHECK(rel_err(g_relu[i], fd_probe(x, i, 1e-5, eval_relu)) < 1e-4);
    }

    auto eval_sig = [&] { return loss(sigmoid(x)); };
    const TensorD g_sig = sigmoid_backward(sigmoid(x), loss.grad());
    for (std::int64_t i = 0; i < x.size(); ++i) {
      CHECK(rel_err(g_sig[i], fd_probe(x, i, 1e-5, eval_sig)) < 1e-4);
    }
  }

  // d sigmoid / dx at 0 is 0.25.
  TensorD x0({1, 1, 1, 1});
  TensorD dy = TensorD::constant({1, 1, 1, 1}, 1.0);
  CHECK(sigmoid_backward(sigmoid(x0), dy)[0] == doctest::Approx(0.25));
}

TEST_CASE("dropout scaling, masks, and backward") {
  TensorD x = TensorD::constant({4, 2, 2, 2}, 1.0);
  CHECK_THROWS_AS(dropout(x, 1.0, Mode::kTrain, nullptr), Error);

  const TensorD same = dropout(x, 0.7, Mode::kInfer, nullptr);
  for (std::int64_t i = 0; i < x.size(); ++i) CHECK(same[i] == 1.0);

  Rng rng(11);
  DropoutCache cache;
  const double rate = 0.5;
  const TensorD y = dropout(x, rate, Mode::kTrain, &rng, &cache);
  int kept = 0;
  for (std::int64_t i = 0; i < y.size(); ++i) {
    const bool k = cache.keep[static_cast<std::size_t>(i)] != 0;
    CHECK(y[i] == doctest::Approx(k ? 2.0 : 0.0));
    kept += k;
  }
  CHECK(kept > 0);
  CHECK(kept < y.size());

  // Same seed reproduces the same mask.
  Rng rng2(11);
  const TensorD y2 = dropout(x, rate, Mode::kTrain, &rng2);
  for (std::int64_t i = 0; i < y.size(); ++i) CHECK(y[i] == y2[i]);

  TensorD dy({4, 2, 2, 2});
  Rng wrng(5);
  fill_normal(dy, wrng);
  const TensorD gin = dropout_backward(dy, rate, cache);
  for (std::int64_t i = 0; i < dy.size(); ++i) {
    CHECK(gin[i] ==
          doctest::Approx(cache.keep[static_cast<std::size_t>(i)] ? dy[i] * 2.0
                                                                  : 0.0));
  }
}

TEST_CASE("l2 normalization forward and backward") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 80);
    TensorD x({3, 5});
    fill_normal(x, rng);
    L2NormalizeCache cache;
    const TensorD y = l2_normalize(x, &cache);
    for (int b = 0; b < 3; ++b) {
      double ss = 0.0;
      for (int i = 0; i < 5; ++i) ss += y[b * 5 + i] * y[b * 5 + i];
      CHECK(std::sqrt(ss) == doctest::Approx(1.0).epsilon(1e-9));
    }
    WeightedSum loss({3, 5}, rng);
    auto eval = [&] { return loss(l2_normalize(x)); };
    const TensorD gin = l2_normalize_backward(y, cache, loss.grad());
    for (std::int64_t i = 0; i < x.size(); ++i) {
      CHECK(rel_err(gin[i], fd_probe(x, i, 1e-6, eval)) < 1e-4);
    }
  }
}

TEST_CASE("bce loss value and fused logit gradient") {
  TensorD p({4}), t({4});
  p[0] = 0.5;
  p[1] = 0.5;
  p[2] = 0.9;
  p[3] = 0.1;
  t[0] = 0.0;
  t[1] = 1.0;
  t[2] = 1.0;
  t[3] = 0.0;
  const double want = -(std::log(0.5) + std::log(0.5) + std::log(0.9) +
                        std::log(0.9)) /
                      4.0;
  CHECK(bce_loss(p, t) == doctest::Approx(want).epsilon(1e-12));

  // Clamping keeps saturated predictions finite.
  TensorD sat({2}), ts({2});
  sat[0] = 0.0;
  sat[1] = 1.0;
  ts[0] = 1.0;
  ts[1] = 0.0;
  CHECK(std::isfinite(bce_loss(sat, ts)));

  // Fused gradient equals finite differences through sigmoid + BCE.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 7);
    TensorD z({1, 1, 1, 6}), y({1, 1, 1, 6});
    fill_normal(z, rng, 2.0);
    for (std::int64_t i = 0; i < y.size(); ++i)
      y[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
    auto eval = [&] { return bce_loss(sigmoid(z), y); };
    const TensorD g = bce_logit_grad(sigmoid(z), y);
    for (std::int64_t i = 0; i < z.size(); ++i) {
      CHECK(rel_err(g[i], fd_probe(z, i, 1e-6, eval)) < 1e-6);
    }
  }
}

TEST_CASE("triplet semi-hard loss equals brute force on random batches") {
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    Rng rng(seed);
    const int ids = 2 + static_cast<int>(rng.uniform_int(5));
    const int per = 2 + static_cast<int>(rng.uniform_int(3));
    const int B = ids * per;
    if (B > 24) continue;
    const int D = 2 + static_cast<int>(rng.uniform_int(7));
    TensorD emb({B, D});
    fill_normal(emb, rng);
    std::vector<int> labels(B);
    for (int i = 0; i < B; ++i) labels[i] = i / per;

    const TripletStats stats = triplet_semihard_loss(emb, labels, 2.0);
    const double want = triplet_brute_force(emb, labels, 2.0);
    CHECK(stats.loss >= 0.0);
    CHECK(std::abs(stats.loss - want) < 1e-5);
    ++checked;
  }
  CHECK(checked >= 900);
}

TEST_CASE("triplet semi-hard hand cases and errors") {
  // Six embeddings on a line, two per identity.
  TensorD emb({6, 1});
  const double xs[6] = {0.0, 0.1, 1.0, 1.1, 4.0, 4.2};
  for (int i = 0; i < 6; ++i) emb[i] = xs[i];
  std::vector<int> labels = {0, 0, 1, 1, 2, 2};
  const TripletStats stats = triplet_semihard_loss(emb, labels, 2.0);
  CHECK(stats.pairs == 6);
  CHECK(stats.loss ==
        doctest::Approx(triplet_brute_force(emb, labels, 2.0)).epsilon(1e-12));

  // All-identical embeddings: no negative is farther than the positive, the
  // fallback picks distance 0, every hinge equals the margin.
  TensorD flat = TensorD::constant({4, 3}, 0.25);
  std::vector<int> l2 = {0, 0, 1, 1};
  CHECK(triplet_semihard_loss(flat, l2, 2.0).loss == doctest::Approx(2.0));

  TensorD e2({2, 2});
  std::vector<int> same = {0, 0};
  CHECK_THROWS_AS(triplet_semihard_loss(e2, same, 2.0), Error);  // no negatives
  std::vector<int> distinct = {0, 1};
  CHECK_THROWS_AS(triplet_semihard_loss(e2, distinct, 2.0), Error);  // no pairs
}

TEST_CASE("triplet gradient matches finite differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 500);
    const int B = 8, D = 4;
    TensorD emb({B, D});
    fill_normal(emb, rng);
    std::vector<int> labels = {0, 0, 1, 1, 2, 2, 3, 3};

    TensorD grad({B, D});
    triplet_semihard_loss(emb, labels, 2.0, &grad);
    auto eval = [&] { return triplet_semihard_loss(emb, labels, 2.0).loss; };
    for (std::int64_t i = 0; i < emb.size(); ++i) {
      const double fd = fd_probe(emb, i, 1e-6, eval);
      CHECK(rel_err(grad[i], fd) < 1e-4);
    }
  }
}

TEST_CASE("sgd step arithmetic and schedule") {
  SgdConfig cfg;
  CHECK(sgd_learning_rate(cfg, 0) == doctest::Approx(0.1));
  CHECK(sgd_learning_rate(cfg, 1999) == doctest::Approx(0.1));
  CHECK(sgd_learning_rate(cfg, 4000) == doctest::Approx(0.09216).epsilon(1e-12));

  Sequential<double> net;
  net.conv(1, 1, 1, 1);
  auto refs = net.param_refs();
  refs[0].tensor->array()[0] = 1.0;
  refs[0].tensor->ensure_grad();
  refs[0].tensor->grad()[0] = 1.0;
  OptimizerState state;
  sgd_step(refs, state);
  CHECK(refs[0].tensor->array()[0] == doctest::Approx(0.9));
  CHECK(state.step == 1);

  refs[0].tensor->grad()[0] = 0.0;
  sgd_step(refs, state);
  CHECK(refs[0].tensor->array()[0] == doctest::Approx(0.9));

  OptimizerState decay;
  decay.cfg.weight_decay = 0.1;
  refs[0].tensor->array()[0] = 1.0;
  refs[0].tensor->grad()[0] = 0.0;
  sgd_step(refs, decay);
  CHECK(refs[0].tensor->array()[0] == doctest::Approx(1.0 - 0.1 * 0.1));

  refs[0].tensor->grad()[0] = std::nan("");
  CHECK_THROWS_AS(sgd_step(refs, state), Error);
}

namespace {

Sequential<double> small_net() {
  Sequential<double> net;
  net.conv(3, 3, 1, 4)
      .batchnorm(4)
      .relu()
      .maxpool(2, 2)
      .conv(3, 3, 4, 2, 1, 1, Padding::kSame)
      .batchnorm(2)
      .dropout(0.3)
      .conv(4, 4, 2, 1)
      .sigmoid();
  return net;
}

TensorD random_batch(int n, int h, int w, int c, std::uint64_t seed) {
  TensorD x({n, h, w, c});
  Rng rng(seed);
  fill_normal(x, rng, 0.8);
  return x;
}

}  // namespace

TEST_CASE("grad_check on a mixed network and a linear network") {
  Sequential<double> net = small_net();
  Rng init(123);
  net.init_params(init);

  const TensorD x = random_batch(4, 7, 7, 1, 9);
  TensorD target({4, 1, 1, 1});
  Rng trng(10);
  for (int i = 0; i < 4; ++i) target[i] = trng.uniform() < 0.5 ? 0.0 : 1.0;

  auto loss_fn = [&](Sequential<double>& m) {
    Rng drop(777);
    return bce_loss(m.forward(x, Mode::kTrain, &drop), target);
  };
  auto grad_fn = [&](Sequential<double>& m) {
    m.zero_grads();
    Rng drop(777);
    Tape<double> tape;
    const TensorD pred = m.forward(x, Mode::kTrain, &drop, &tape);
    // Inject the fused gradient below the final sigmoid.
    m.backward(tape, bce_logit_grad(pred, target),
               static_cast<int>(m.layer_count()) - 2);
  };
  const GradCheckReport report = grad_check(net, loss_fn, grad_fn);
  CHECK(report.max_rel_err < 1e-4);
  CHECK(report.probes == net.count_params(true));

  // Deliberately corrupted analytic gradients must be detected.
  auto bad_grad_fn = [&](Sequential<double>& m) {
    grad_fn(m);
    for (auto ref : m.param_refs()) {
      if (ref.trainable) ref.tensor->grad() *= 1.01;
    }
  };
  CHECK(grad_check(net, loss_fn, bad_grad_fn).max_rel_err > 1e-3);

  // Purely linear composition: exact up to rounding.
  Sequential<double> lin;
  lin.conv(3, 3, 2, 3);
  Rng linit(5);
  lin.init_params(linit);
  const TensorD xl = random_batch(2, 5, 5, 2, 11);
  WeightedSum wsum({2, 3, 3, 3}, linit);
  auto lin_loss = [&](Sequential<double>& m) {
    return wsum(m.forward(xl, Mode::kInfer));
  };
  auto lin_grad = [&](Sequential<double>& m) {
    m.zero_grads();
    Tape<double> tape;
    m.forward(xl, Mode::kInfer, nullptr, &tape);
    m.backward(tape, wsum.grad());
  };
  CHECK(grad_check(lin, lin_loss, lin_grad).max_rel_err < 1e-8);
}

TEST_CASE("probe budget spreads probes across tensors") {
  Sequential<double> net = small_net();
  Rng init(22);
  net.init_params(init);
  const TensorD x = random_batch(4, 7, 7, 1, 23);
  WeightedSum wsum({4, 1, 1, 1}, init);
  auto loss_fn = [&](Sequential<double>& m) {
    return wsum(m.forward(x, Mode::kInfer));
  };
  auto grad_fn = [&](Sequential<double>& m) {
    m.zero_grads();
    Tape<double> tape;
    m.forward(x, Mode::kInfer, nullptr, &tape);
    m.backward(tape, wsum.grad());
  };
  const GradCheckReport report = grad_check(net, loss_fn, grad_fn, 1e-3, 40, 3);
  CHECK(report.probes >= 30);
  CHECK(report.probes < net.count_params(true));
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("sequential training is bit-deterministic for 100 steps") {
  auto run = [](std::uint64_t seed) {
    Sequential<float> net;
    net.conv(3, 3, 1, 4).batchnorm(4).relu().conv(3, 3, 4, 1).sigmoid();
    Rng rng(seed);
    net.init_params(rng);
    OptimizerState opt;
    opt.cfg.base_lr = 0.05;
    Rng data = rng.fork("data");
    for (int step = 0; step < 100; ++step) {
      TensorF x({4, 5, 5, 1});
      TensorF y({4, 1, 1, 1});
      for (std::int64_t i = 0; i < x.size(); ++i)
        x[i] = static_cast<float>(data.uniform());
      for (std::int64_t i = 0; i < y.size(); ++i)
        y[i] = data.uniform() < 0.5 ? 0.0f : 1.0f;
      net.zero_grads();
      Tape<float> tape;
      Rng drop = data.fork("drop" + std::to_string(step));
      const TensorF pred = net.forward(x, Mode::kTrain, &drop, &tape);
      net.backward(tape, bce_logit_grad(pred, y),
                   static_cast<int>(net.layer_count()) - 2);
      auto refs = net.param_refs();
      sgd_step(refs, opt);
    }
    std::vector<float> flat;
    for (auto ref : net.param_refs()) {
      for (std::int64_t i = 0; i < ref.tensor->size(); ++i)
        flat.push_back((*ref.tensor)[i]);
    }
    return flat;
  };
  const auto a = run(77), b = run(77), c = run(78);
  REQUIRE(a.size() == b.size());
  bool identical = true;
  for (std::size_t i = 0; i < a.size(); ++i) {
    identical = identical && std::memcmp(&a[i], &b[i], sizeof(float)) == 0;
  }
  CHECK(identical);
  bool differs = false;
  for (std::size_t i = 0; i < a.size() && i < c.size(); ++i) {
    differs = differs || a[i] != c[i];
  }
  CHECK(differs);
}

TEST_CASE("model container round trip and format errors") {
  Sequential<float> net;
  net.conv(3, 3, 1, 2).batchnorm(2).relu().conv(2, 2, 2, 1).sigmoid();
  Rng rng(31);
  net.init_params(rng);
  for (auto ref : net.param_refs()) {
    for (std::int64_t i = 0; i < ref.tensor->size(); ++i) {
      if (!ref.trainable) (*ref.tensor)[i] = static_cast<float>(rng.uniform());
    }
  }

  const std::string path = "roundtrip_model.pknn";
  save_model(net, {{"architecture", "toy"}, {"seed", "31"}}, path);
  const Container c = load_container(path);
  CHECK(c.meta("architecture") == "toy");
  CHECK(c.meta("missing", "x") == "x");

  Sequential<float> other;
  other.conv(3, 3, 1, 2).batchnorm(2).relu().conv(2, 2, 2, 1).sigmoid();
  load_model_params(other, c);
  for (std::size_t i = 0; i < net.param_refs().size(); ++i) {
    auto a = net.param_refs()[i];
    auto b = other.param_refs()[i];
    REQUIRE(a.tensor->size() == b.tensor->size());
    for (std::int64_t k = 0; k < a.tensor->size(); ++k) {
      CHECK(std::memcmp(&(*a.tensor)[k], &(*b.tensor)[k], sizeof(float)) == 0);
    }
  }

  // Wrong magic.
  {
    std::FILE* f = std::fopen("bad_magic.pknn", "wb");
    std::fputs("NOPE", f);
    std::fclose(f);
    CHECK_THROWS_AS(load_container("bad_magic.pknn"), Error);
  }
  // Truncation.
  {
    const Container full = load_container(path);
    std::FILE* in = std::fopen(path.c_str(), "rb");
    char buf[64];
    const std::size_t n = std::fread(buf, 1, sizeof(buf), in);
    std::fclose(in);
    std::FILE* out = std::fopen("truncated.pknn", "wb");
    std::fwrite(buf, 1, n / 2, out);
    std::fclose(out);
    CHECK_THROWS_AS(load_container("truncated.pknn"), Error);
  }
  std::remove(path.c_str());
  std::remove("bad_magic.pknn");
  std::remove("truncated.pknn");
}
