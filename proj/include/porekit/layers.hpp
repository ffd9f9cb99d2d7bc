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

#ifndef POREKIT_LAYERS_HPP_
#define POREKIT_LAYERS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "porekit/rng.hpp"
#include "porekit/tensor.hpp"

namespace porekit {

enum class Mode { kTrain, kInfer };
enum class Padding { kValid, kSame };

struct ConvGeometry {
  int out_h = 0, out_w = 0;
  int pad_top = 0, pad_left = 0;
};

// Output extents follow floor((in - k) / stride) + 1 for valid padding and
// ceil(in / stride) for same padding (extra padding goes bottom/right).
inline ConvGeometry conv_geometry(int in_h, int in_w, int kh, int kw, int sy,
                                  int sx, Padding pad) {
  PK_CHECK(sy >= 1 && sx >= 1, ErrorKind::kInvalidArgument,
           "stride components must be >= 1");
  ConvGeometry g;
  if (pad == Padding::kValid) {
    PK_CHECK(in_h >= kh && in_w >= kw, ErrorKind::kInvalidShape,
             "input smaller than kernel under valid padding");
    g.out_h = (in_h - kh) / sy + 1;
    g.out_w = (in_w - kw) / sx + 1;
  } else {
    g.out_h = (in_h + sy - 1) / sy;
    g.out_w = (in_w + sx - 1) / sx;
    int pad_h = std::max((g.out_h - 1) * sy + kh - in_h, 0);
    int pad_w = std::max((g.out_w - 1) * sx + kw - in_w, 0);
    g.pad_top = pad_h / 2;
    g.pad_left = pad_w / 2;
  }
  return g;
}

namespace detail {

template <typename S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Fills the patch matrix for one sample: row (oy*out_w+ox), column
// ((ky*kw+kx)*C + c). Out-of-bounds sites contribute zeros.
template <typename S>
void im2col_sample(const Tensor<S>& input, int n, const ConvGeometry& g, int kh,
                   int kw, int sy, int sx, RowMat<S>& col, int row_offset) {
  const int H = input.dim(1), W = input.dim(2), C = input.dim(3);
  const S* base = input.data() +
                  static_cast<std::int64_t>(n) * H * W * C;
  for (int oy = 0; oy < g.out_h; ++oy) {
    for (int ox = 0; ox < g.out_w; ++ox) {
      S* row = col.row(row_offset + oy * g.out_w + ox).data();
      int idx = 0;
      for (int ky = 0; ky < kh; ++ky) {
        const int iy = oy * sy - g.pad_top + ky;
        for (int kx = 0; kx < kw; ++kx) {
          const int ix = ox * sx - g.pad_left + kx;
          if (iy < 0 || iy >= H || ix < 0 || ix >= W) {
            for (int c = 0; c < C; ++c) row[idx++] = S(0);
          } else {
            const S* px = base + (static_cast<std::int64_t>(iy) * W + ix) * C;
            for (int c = 0; c < C; ++c) row[idx++] = px[c];
          }
        }
      }
    }
  }
}

// Scatter-adds the patch-matrix gradient back into the input gradient.
template <typename S>
void col2im_sample(const RowMat<S>& col, int row_offset, int n,
                   const ConvGeometry& g, int kh, int kw, int sy, int sx,
                   Tensor<S>& input_grad) {
  const int H = input_grad.dim(1), W = input_grad.dim(2), C = input_grad.dim(3);
  S* base = input_grad.data() + static_cast<std::int64_t>(n) * H * W * C;
  for (int oy = 0; oy < g.out_h; ++oy) {
    for (int ox = 0; ox < g.out_w; ++ox) {
      const S* row = col.row(row_offset + oy * g.out_w + ox).data();
      int idx = 0;
      for (int ky = 0; ky < kh; ++ky) {
        const int iy = oy * sy - g.pad_top + ky;
        for (int kx = 0; kx < kw; ++kx) {
          const int ix = ox * sx - g.pad_left + kx;
          if (iy < 0 || iy >= H || ix < 0 || ix >= W) {
            idx += C;
          } else {
            S* px = base + (static_cast<std::int64_t>(iy) * W + ix) * C;
            for (int c = 0; c < C; ++c) px[c] += row[idx++];
          }
        }
      }
    }
  }
}

inline int conv_chunk_samples(std::int64_t rows_per_sample, std::int64_t cols,
                              std::size_t elem_size) {
  const std::int64_t budget = 16ll << 20;  // bytes of scratch per GEMM chunk
  std::int64_t g = budget / std::max<std::int64_t>(
                                1, rows_per_sample * cols *
                                       static_cast<std::int64_t>(elem_size));
  return static_cast<int>(std::max<std::int64_t>(1, g));
}

}  // namespace detail

// input [N,H,W,C], kernel [kh,kw,C,F] -> output [N,out_h,out_w,F].
template <typename S>
Tensor<S> conv2d(const Tensor<S>& input, const Tensor<S>& kernel, int sy,
                 int sx, Padding pad) {
  PK_CHECK(input.rank() == 4 && kernel.rank() == 4, ErrorKind::kInvalidShape,
           "conv2d expects rank-4 input and kernel");
  PK_CHECK(input.dim(3) == kernel.dim(2), ErrorKind::kInvalidShape,
           "conv2d channel mismatch: input " + input.shape_str() + " kernel " +
               kernel.shape_str());
  const int N = input.dim(0), kh = kernel.dim(0), kw = kernel.dim(1),
            C = kernel.dim(2), F = kernel.dim(3);
  const ConvGeometry g =
      conv_geometry(input.dim(1), input.dim(2), kh, kw, sy, sx, pad);

  Tensor<S> out({N, g.out_h, g.out_w, F});
  const std::int64_t rows_per_sample =
      static_cast<std::int64_t>(g.out_h) * g.out_w;
  const std::int64_t cols = static_cast<std::int64_t>(kh) * kw * C;
  const int chunk = detail::conv_chunk_samples(rows_per_sample, cols, sizeof(S));

  Eigen::Map<const detail::RowMat<S>> kmat(kernel.data(), cols, F);
  detail::RowMat<S> col(rows_per_sample * std::min(chunk, N), cols);
  for (int n0 = 0; n0 < N; n0 += chunk) {
    const int nb = std::min(chunk, N - n0);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < nb; ++i) {
      detail::im2col_sample(input, n0 + i, g, kh, kw, sy, sx, col,
                            static_cast<int>(i * rows_per_sample));
    }
    Eigen::Map<detail::RowMat<S>> omat(
        out.data() + static_cast<std::int64_t>(n0) * rows_per_sample * F,
        nb * rows_per_sample, F);
    omat.noalias() = col.topRows(nb * rows_per_sample) * kmat;
  }
  return out;
}

template <typename S>
struct ConvGrads {
  Tensor<S> input_grad;
  Tensor<S> kernel_grad;
};

template <typename S>
ConvGrads<S> conv2d_backward(const Tensor<S>& input, const Tensor<S>& kernel,
                             int sy, int sx, Padding pad,
                             const Tensor<S>& out_grad) {
  const int N = input.dim(0), kh = kernel.dim(0), kw = kernel.dim(1),
            C = kernel.dim(2), F = kernel.dim(3);
  const ConvGeometry g =
      conv_geometry(input.dim(1), input.dim(2), kh, kw, sy, sx, pad);
  PK_CHECK(out_grad.dim(0) == N && out_grad.dim(1) == g.out_h &&
               out_grad.dim(2) == g.out_w && out_grad.dim(3) == F,
           ErrorKind::kInvalidShape, "conv2d_backward output grad shape");

  ConvGrads<S> grads;
  grads.input_grad = Tensor<S>(input.shape());
  grads.kernel_grad = Tensor<S>(kernel.shape());

  const std::int64_t rows_per_sample =
      static_cast<std::int64_t>(g.out_h) * g.out_w;
  const std::int64_t cols = static_cast<std::int64_t>(kh) * kw * C;
  const int chunk = detail::conv_chunk_samples(rows_per_sample, cols, sizeof(S));

  Eigen::Map<const detail::RowMat<S>> kmat(kernel.data(), cols, F);
  Eigen::Map<detail::RowMat<S>> kgrad(grads.kernel_grad.data(), cols, F);
  detail::RowMat<S> col(rows_per_sample * std::min(chunk, N), cols);
  detail::RowMat<S> dcol(rows_per_sample * std::min(chunk, N), cols);
  for (int n0 = 0; n0 < N; n0 += chunk) {
    const int nb = std::min(chunk, N - n0);
    Eigen::Map<const detail::RowMat<S>> omat(
        out_grad.data() + static_cast<std::int64_t>(n0) * rows_per_sample * F,
        nb * rows_per_sample, F);
    dcol.topRows(nb * rows_per_sample).noalias() = omat * kmat.transpose();
#pragma omp parallel for schedule(static)
    for (int i = 0; i < nb; ++i) {
      detail::col2im_sample(dcol, static_cast<int>(i * rows_per_sample), n0 + i,
                            g, kh, kw, sy, sx, grads.input_grad);
    }
#pragma omp parallel for schedule(static)
    for (int i = 0; i < nb; ++i) {
      detail::im2col_sample(input, n0 + i, g, kh, kw, sy, sx, col,
                            static_cast<int>(i * rows_per_sample));
    }
    // Chunks accumulate in fixed order so reruns are bit-identical.
    kgrad.noalias() += col.topRows(nb * rows_per_sample).transpose() *
                       omat;
  }
  return grads;
}

struct MaxPoolCache {
  std::vector<std::int64_t> argmax;  // flat input index per output element
};

// 3x3 window, stride 1, valid padding in the detection net; kept generic.
template <typename S>
Tensor<S> maxpool2d(const Tensor<S>& input, int ph, int pw, int sy, int sx,
                    MaxPoolCache* cache = nullptr) {
  PK_CHECK(input.rank() == 4, ErrorKind::kInvalidShape,
           "maxpool2d expects rank-4 input");
  PK_CHECK(input.dim(1) >= ph && input.dim(2) >= pw, ErrorKind::kInvalidShape,
           "maxpool2d input smaller than window");
  const int N = input.dim(0), H = input.dim(1), W = input.dim(2),
            C = input.dim(3);
  const ConvGeometry g = conv_geometry(H, W, ph, pw, sy, sx, Padding::kValid);
  Tensor<S> out({N, g.out_h, g.out_w, C});
  if (cache) cache->argmax.assign(static_cast<std::size_t>(out.size()), -1);
  for (int n = 0; n < N; ++n) {
    for (int oy = 0; oy < g.out_h; ++oy) {
      for (int ox = 0; ox < g.out_w; ++ox) {
        for (int c = 0; c < C; ++c) {
          S best = std::numeric_limits<S>::lowest();
          std::int64_t best_idx = -1;
          for (int ky = 0; ky < ph; ++ky) {
            for (int kx = 0; kx < pw; ++kx) {
              const std::int64_t idx =
                  input.index4(n, oy * sy + ky, ox * sx + kx, c);
              const S v = input[idx];
              if (v > best) {  // first occurrence wins ties
                best = v;
                best_idx = idx;
              }
            }
          }
          const std::int64_t oidx = out.index4(n, oy, ox, c);
          out[oidx] = best;
          if (cache) cache->argmax[static_cast<std::size_t>(oidx)] = best_idx;
        }
      }
    }
  }
  return out;
}

// Routes each output gradient to the single argmax recorded in the cache.
template <typename S>
Tensor<S> maxpool2d_backward(const Tensor<S>& input, const MaxPoolCache& cache,
                             const Tensor<S>& out_grad) {
  Tensor<S> gin(input.shape());
  PK_CHECK(cache.argmax.size() == static_cast<std::size_t>(out_grad.size()),
           ErrorKind::kInvalidShape, "maxpool cache does not match output");
  for (std::int64_t i = 0; i < out_grad.size(); ++i) {
    gin[cache.argmax[static_cast<std::size_t>(i)]] += out_grad[i];
  }
  return gin;
}

// Per-channel batchnorm state. Fresh models start from mean 0 / variance 1 so
// inference is valid before the first update; a raw zero-variance state marks
// "no statistics yet" and refuses inference.
template <typename S>
struct BatchNormParams {
  Tensor<S> gamma, beta, moving_mean, moving_var;
  S eps = static_cast<S>(1e-3);
  S momentum = static_cast<S>(0.9);

  static BatchNormParams identity_init(int channels) {
    BatchNormParams p;
    p.gamma = Tensor<S>::constant({channels}, S(1));
    p.beta = Tensor<S>({channels});
    p.moving_mean = Tensor<S>({channels});
    p.moving_var = Tensor<S>::constant({channels}, S(1));
    return p;
  }

  static BatchNormParams without_stats(int channels) {
    BatchNormParams p = identity_init(channels);
    p.moving_var.array().setZero();
    return p;
  }

  int channels() const { return gamma.dim(0); }
  bool stats_ready() const {
    return moving_var.size() > 0 && (moving_var.array() > S(0)).all();
  }
};

struct BatchNormCache {
  Eigen::ArrayXd mean, invstd;
  bool batch_stats = false;  // true when normalization used batch statistics
};

// Train mode normalizes over batch+spatial axes with batch statistics and
// updates the moving averages; infer mode is a per-channel affine map from the
// moving statistics. Accumulation is in double.
template <typename S>
Tensor<S> batchnorm(const Tensor<S>& input, BatchNormParams<S>& params,
                    Mode mode, BatchNormCache* cache = nullptr) {
  PK_CHECK(input.rank() == 4, ErrorKind::kInvalidShape,
           "batchnorm expects rank-4 input");
  const int C = input.dim(3);
  PK_CHECK(C == params.channels(), ErrorKind::kInvalidShape,
           "batchnorm channel mismatch");
  const std::int64_t per_channel = input.size() / C;
  Tensor<S> out(input.shape());

  if (mode == Mode::kInfer) {
    PK_CHECK(params.stats_ready(), ErrorKind::kNumeric,
             "batchnorm inference requested before any statistics exist");
    Eigen::Array<S, Eigen::Dynamic, 1> scale(C), shift(C);
    if (cache) {
      cache->batch_stats = false;
      cache->mean.resize(C);
      cache->invstd.resize(C);
    }
    for (int c = 0; c < C; ++c) {
      const S inv = S(1) / std::sqrt(params.moving_var[c] + params.eps);
      scale[c] = params.gamma[c] * inv;
      shift[c] = params.beta[c] - params.moving_mean[c] * scale[c];
      if (cache) {
        cache->mean[c] = static_cast<double>(params.moving_mean[c]);
        cache->invstd[c] = static_cast<double>(inv);
      }
    }
    const S* x = input.data();
    S* y = out.data();
    for (std::int64_t i = 0; i < input.size(); ++i) {
      const int c = static_cast<int>(i % C);
      y[i] = x[i] * scale[c] + shift[c];
    }
    return out;
  }

  PK_CHECK(input.dim(0) >= 2, ErrorKind::kInvalidArgument,
           "batchnorm training requires batch size >= 2");
  Eigen::ArrayXd sum = Eigen::ArrayXd::Zero(C);
  Eigen::ArrayXd sumsq = Eigen::ArrayXd::Zero(C);
  const S* x = input.data();
  for (std::int64_t i = 0; i < input.size(); ++i) {
    const int c = static_cast<int>(i % C);
    const double v = static_cast<double>(x[i]);
    sum[c] += v;
    sumsq[c] += v * v;
  }
  Eigen::ArrayXd mean = sum / static_cast<double>(per_channel);
  Eigen::ArrayXd var =
      (sumsq / static_cast<double>(per_channel) - mean.square()).max(0.0);
  Eigen::ArrayXd invstd = (var + static_cast<double>(params.eps)).rsqrt();
  if (cache) {
    cache->mean = mean;
    cache->invstd = invstd;
    cache->batch_stats = true;
  }

  Eigen::Array<S, Eigen::Dynamic, 1> scale(C), shift(C);
  for (int c = 0; c < C; ++c) {
    scale[c] = params.gamma[c] * static_cast<S>(invstd[c]);
    shift[c] = params.beta[c] - static_cast<S>(mean[c]) * scale[c];
  }
  S* y = out.data();
  for (std::int64_t i = 0; i < input.size(); ++i) {
    const int c = static_cast<int>(i % C);
    y[i] = x[i] * scale[c] + shift[c];
  }
  const S m = params.momentum;
  for (int c = 0; c < C; ++c) {
    params.moving_mean[c] =
        m * params.moving_mean[c] + (S(1) - m) * static_cast<S>(mean[c]);
    params.moving_var[c] =
        m * params.moving_var[c] + (S(1) - m) * static_cast<S>(var[c]);
  }
  return out;
}

// Gradient through the normalization. With batch statistics:
//   dx = gamma*invstd * (dy - mean(dy) - xhat*mean(dy*xhat));
// with frozen (moving) statistics the mean-dependence terms vanish and
//   dx = gamma*invstd * dy.
// Accumulates gamma/beta gradients into params tensors either way.
template <typename S>
Tensor<S> batchnorm_backward(const Tensor<S>& input, BatchNormParams<S>& params,
                             const BatchNormCache& cache,
                             const Tensor<S>& out_grad) {
  const int C = input.dim(3);
  PK_CHECK(cache.mean.size() == C && cache.invstd.size() == C,
           ErrorKind::kInvalidArgument, "batchnorm backward without a cache");
  const std::int64_t per_channel = input.size() / C;
  params.gamma.ensure_grad();
  params.beta.ensure_grad();

  Eigen::ArrayXd sum_dy = Eigen::ArrayXd::Zero(C);
  Eigen::ArrayXd sum_dy_xhat = Eigen::ArrayXd::Zero(C);
  const S* x = input.data();
  const S* dy = out_grad.data();
  for (std::int64_t i = 0; i < input.size(); ++i) {
    const int c = static_cast<int>(i % C);
    const double xhat =
        (static_cast<double>(x[i]) - cache.mean[c]) * cache.invstd[c];
    sum_dy[c] += static_cast<double>(dy[i]);
    sum_dy_xhat[c] += static_cast<double>(dy[i]) * xhat;
  }
  for (int c = 0; c < C; ++c) {
    params.beta.grad()[c] += static_cast<S>(sum_dy[c]);
    params.gamma.grad()[c] += static_cast<S>(sum_dy_xhat[c]);
  }

  Tensor<S> gin(input.shape());
  S* gx = gin.data();
  if (!cache.batch_stats) {
    for (std::int64_t i = 0; i < input.size(); ++i) {
      const int c = static_cast<int>(i % C);
      gx[i] = static_cast<S>(static_cast<double>(params.gamma[c]) *
                             cache.invstd[c] * static_cast<double>(dy[i]));
    }
    return gin;
  }
  Eigen::ArrayXd mean_dy = sum_dy / static_cast<double>(per_channel);
  Eigen::ArrayXd mean_dy_xhat = sum_dy_xhat / static_cast<double>(per_channel);
  for (std::int64_t i = 0; i < input.size(); ++i) {
    const int c = static_cast<int>(i % C);
    const double xhat =
        (static_cast<double>(x[i]) - cache.mean[c]) * cache.invstd[c];
    gx[i] = static_cast<S>(static_cast<double>(params.gamma[c]) *
                           cache.invstd[c] *
                           (static_cast<double>(dy[i]) - mean_dy[c] -
                            xhat * mean_dy_xhat[c]));
  }
  return gin;
}

template <typename S>
Tensor<S> relu(const Tensor<S>& input) {
  Tensor<S> out(input.shape());
  out.array() = input.array().max(S(0));
  return out;
}

template <typename S>
Tensor<S> relu_backward(const Tensor<S>& input, const Tensor<S>& out_grad) {
  Tensor<S> gin(input.shape());
  gin.array() = (input.array() > S(0)).select(out_grad.array(), S(0));
  return gin;
}

// Outputs are clamped into the open interval (0, 1) of the scalar type.
template <typename S>
Tensor<S> sigmoid(const Tensor<S>& input) {
  Tensor<S> out(input.shape());
  const S hi = std::nextafter(S(1), S(0));
  const S lo = std::numeric_limits<S>::min();
  for (std::int64_t i = 0; i < input.size(); ++i) {
    const S x = input[i];
    S y;
    if (x >= S(0)) {
      y = S(1) / (S(1) + std::exp(-x));
    } else {
      const S e = std::exp(x);
      y = e / (S(1) + e);
    }
    out[i] = std::clamp(y, lo, hi);
  }
  return out;
}

template <typename S>
Tensor<S> sigmoid_backward(const Tensor<S>& output, const Tensor<S>& out_grad) {
  Tensor<S> gin(output.shape());
  gin.array() = out_grad.array() * output.array() * (S(1) - output.array());
  return gin;
}

struct DropoutCache {
  std::vector<std::uint8_t> keep;
};

// Inverted dropout: survivors are scaled by 1/(1-rate) at train time so
// inference is the identity.
template <typename S>
Tensor<S> dropout(const Tensor<S>& input, double rate, Mode mode, Rng* rng,
                  DropoutCache* cache = nullptr) {
  PK_CHECK(rate >= 0.0 && rate < 1.0, ErrorKind::kInvalidArgument,
           "dropout rate must lie in [0, 1)");
  if (mode == Mode::kInfer || rate == 0.0) {
    if (cache) cache->keep.clear();
    return input;
  }
  PK_CHECK(rng != nullptr, ErrorKind::kInvalidArgument,
           "dropout in train mode needs an rng");
  Tensor<S> out(input.shape());
  const S scale = static_cast<S>(1.0 / (1.0 - rate));
  if (cache) cache->keep.assign(static_cast<std::size_t>(input.size()), 0);
  for (std::int64_t i = 0; i < input.size(); ++i) {
    const bool keep = rng->uniform() >= rate;
    out[i] = keep ? input[i] * scale : S(0);
    if (cache) cache->keep[static_cast<std::size_t>(i)] = keep ? 1 : 0;
  }
  return out;
}

template <typename S>
Tensor<S> dropout_backward(const Tensor<S>& out_grad, double rate,
                           const DropoutCache& cache) {
  if (cache.keep.empty()) return out_grad;  // identity pass
  Tensor<S> gin(out_grad.shape());
  const S scale = static_cast<S>(1.0 / (1.0 - rate));
  for (std::int64_t i = 0; i < out_grad.size(); ++i) {
    gin[i] = cache.keep[static_cast<std::size_t>(i)] ? out_grad[i] * scale : S(0);
  }
  return gin;
}

struct L2NormalizeCache {
  Eigen::ArrayXd norms;
};

// Normalizes each leading-axis row of the flattened [B, D] view to unit l2
// norm.
template <typename S>
Tensor<S> l2_normalize(const Tensor<S>& input, L2NormalizeCache* cache = nullptr) {
  PK_CHECK(input.rank() >= 2, ErrorKind::kInvalidShape,
           "l2_normalize expects a batch axis");
  const int B = input.dim(0);
  const std::int64_t D = input.size() / B;
  Tensor<S> out(input.shape());
  if (cache) cache->norms.resize(B);
  for (int b = 0; b < B; ++b) {
    const S* x = input.data() + b * D;
    S* y = out.data() + b * D;
    double ss = 0.0;
    for (std::int64_t i = 0; i < D; ++i) ss += double(x[i]) * double(x[i]);
    const double norm = std::max(std::sqrt(ss), 1e-12);
    for (std::int64_t i = 0; i < D; ++i) y[i] = static_cast<S>(x[i] / norm);
    if (cache) cache->norms[b] = norm;
  }
  return out;
}

template <typename S>
Tensor<S> l2_normalize_backward(const Tensor<S>& output,
                                const L2NormalizeCache& cache,
                                const Tensor<S>& out_grad) {
  const int B = output.dim(0);
  const std::int64_t D = output.size() / B;
  Tensor<S> gin(output.shape());
  for (int b = 0; b < B; ++b) {
    const S* y = output.data() + b * D;
    const S* dy = out_grad.data() + b * D;
    S* gx = gin.data() + b * D;
    double dot = 0.0;
    for (std::int64_t i = 0; i < D; ++i) dot += double(y[i]) * double(dy[i]);
    const double inv_norm = 1.0 / cache.norms[b];
    for (std::int64_t i = 0; i < D; ++i) {
      gx[i] = static_cast<S>((double(dy[i]) - double(y[i]) * dot) * inv_norm);
    }
  }
  return gin;
}

}  // namespace porekit

#endif  // POREKIT_LAYERS_HPP_
