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

#ifndef POREKIT_NETWORK_HPP_
#define POREKIT_NETWORK_HPP_

#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "porekit/layers.hpp"
#include "porekit/losses.hpp"
#include "porekit/rng.hpp"
#include "porekit/tensor.hpp"

namespace porekit {

template <typename S>
struct ConvLayer {
  Tensor<S> kernel;  // [kh, kw, in_c, out_c], no bias
  int sy = 1, sx = 1;
  Padding pad = Padding::kValid;
};

template <typename S>
struct BatchNormLayer {
  BatchNormParams<S> params;
};

struct ReluLayer {};
struct SigmoidLayer {};

struct MaxPoolLayer {
  int ph = 2, pw = 2, sy = 1, sx = 1;
};

struct DropoutLayer {
  double rate = 0.5;
};

struct L2NormalizeLayer {};

template <typename S>
using Layer = std::variant<ConvLayer<S>, BatchNormLayer<S>, ReluLayer,
                           SigmoidLayer, MaxPoolLayer, DropoutLayer,
                           L2NormalizeLayer>;

// Per-layer forward records used by backward. inputs[i] is the input of layer
// i; the output of layer i is inputs[i+1] (or final_output for the last).
template <typename S>
struct Tape {
  std::vector<Tensor<S>> inputs;
  Tensor<S> final_output;
  std::vector<MaxPoolCache> pool;
  std::vector<BatchNormCache> bn;
  std::vector<DropoutCache> drop;
  std::vector<L2NormalizeCache> l2;

  const Tensor<S>& output_of(std::size_t i) const {
    return i + 1 < inputs.size() ? inputs[i + 1] : final_output;
  }
};

template <typename S>
struct ParamRef {
  std::string name;
  Tensor<S>* tensor;
  bool trainable;
};

// Plain chain of layers. Parameters are owned by the layers; serialization
// addresses them through param_refs() by name, so layer naming is part of the
// model format.
template <typename S>
class Sequential {
 public:
  Sequential& conv(int kh, int kw, int in_c, int out_c, int sy = 1, int sx = 1,
                   Padding pad = Padding::kValid) {
    ConvLayer<S> l;
    l.kernel = Tensor<S>({kh, kw, in_c, out_c});
    l.sy = sy;
    l.sx = sx;
    l.pad = pad;
    add(std::move(l), "conv" + std::to_string(++conv_count_));
    return *this;
  }

  Sequential& batchnorm(int channels) {
    BatchNormLayer<S> l;
    l.params = BatchNormParams<S>::identity_init(channels);
    add(std::move(l), "bn" + std::to_string(++bn_count_));
    return *this;
  }

  Sequential& relu() { return add(ReluLayer{}, "relu"); }
  Sequential& sigmoid() { return add(SigmoidLayer{}, "sigmoid"); }

  Sequential& maxpool(int ph, int pw, int sy = 1, int sx = 1) {
    return add(MaxPoolLayer{ph, pw, sy, sx}, "maxpool");
  }

  Sequential& dropout(double rate) { return add(DropoutLayer{rate}, "dropout"); }
  Sequential& l2norm() { return add(L2NormalizeLayer{}, "l2norm"); }

  // He-normal initialization for conv kernels; batchnorm starts as identity.
  void init_params(Rng& rng) {
    for (auto& layer : layers_) {
      if (auto* c = std::get_if<ConvLayer<S>>(&layer)) {
        const int fan_in = c->kernel.dim(0) * c->kernel.dim(1) * c->kernel.dim(2);
        const double std = std::sqrt(2.0 / fan_in);
        for (std::int64_t i = 0; i < c->kernel.size(); ++i) {
          c->kernel[i] = static_cast<S>(rng.normal(0.0, std));
        }
      }
    }
  }

  std::size_t layer_count() const { return layers_.size(); }
  const Layer<S>& layer(std::size_t i) const { return layers_[i]; }
  Layer<S>& layer(std::size_t i) { return layers_[i]; }

  Tensor<S> forward(const Tensor<S>& input, Mode mode, Rng* rng = nullptr,
                    Tape<S>* tape = nullptr) const {
    if (tape) {
      tape->inputs.clear();
      tape->pool.assign(layers_.size(), {});
      tape->bn.assign(layers_.size(), {});
      tape->drop.assign(layers_.size(), {});
      tape->l2.assign(layers_.size(), {});
    }
    Tensor<S> x = input;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (tape) tape->inputs.push_back(x);
      x = forward_one(i, std::move(x), mode, rng, tape);
    }
    if (tape) tape->final_output = x;
    return x;
  }

  // Propagates grad from layer `from` (default: last) down to the input,
  // accumulating parameter gradients. Starting below the final layer supports
  // fused loss gradients such as bce_logit_grad under a sigmoid head.
  Tensor<S> backward(const Tape<S>& tape, Tensor<S> grad, int from = -1) const {
    if (from < 0) from = static_cast<int>(layers_.size()) - 1;
    PK_CHECK(tape.inputs.size() == layers_.size(), ErrorKind::kInvalidArgument,
             "backward needs a tape from forward");
    for (int i = from; i >= 0; --i) {
      grad = backward_one(static_cast<std::size_t>(i), tape, std::move(grad));
    }
    return grad;
  }

  std::vector<ParamRef<S>> param_refs() {
    std::vector<ParamRef<S>> refs;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const std::string& name = names_[i];
      if (auto* c = std::get_if<ConvLayer<S>>(&layers_[i])) {
        refs.push_back({name + "/kernel", &c->kernel, true});
      } else if (auto* b = std::get_if<BatchNormLayer<S>>(&layers_[i])) {
        refs.push_back({name + "/gamma", &b->params.gamma, true});
        refs.push_back({name + "/beta", &b->params.beta, true});
        refs.push_back({name + "/moving_mean", &b->params.moving_mean, false});
        refs.push_back({name + "/moving_var", &b->params.moving_var, false});
      }
    }
    return refs;
  }

  void zero_grads() {
    for (auto ref : param_refs()) {
      if (ref.trainable) ref.tensor->zero_grad();
    }
  }

  // Counts follow the convention of four parameters per batchnorm channel
  // (scale, shift, moving mean, moving variance), the moving pair being
  // non-trainable.
  std::int64_t count_params(bool trainable_only = false) {
    std::int64_t n = 0;
    for (auto ref : param_refs()) {
      if (!trainable_only || ref.trainable) n += ref.tensor->size();
    }
    return n;
  }

  template <typename T>
  Sequential<T> cast() {
    Sequential<T> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      std::visit(
          [&](const auto& l) {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, ConvLayer<S>>) {
              ConvLayer<T> c;
              c.kernel = l.kernel.template cast<T>();
              c.sy = l.sy;
              c.sx = l.sx;
              c.pad = l.pad;
              out.add(std::move(c), names_[i]);
            } else if constexpr (std::is_same_v<L, BatchNormLayer<S>>) {
              BatchNormLayer<T> b;
              b.params.gamma = l.params.gamma.template cast<T>();
              b.params.beta = l.params.beta.template cast<T>();
              b.params.moving_mean = l.params.moving_mean.template cast<T>();
              b.params.moving_var = l.params.moving_var.template cast<T>();
              b.params.eps = static_cast<T>(l.params.eps);
              b.params.momentum = static_cast<T>(l.params.momentum);
              out.add(std::move(b), names_[i]);
            } else {
              out.add(l, names_[i]);
            }
          },
          layers_[i]);
    }
    return out;
  }

  template <typename L>
  Sequential& add(L layer, const std::string& name) {
    layers_.emplace_back(std::move(layer));
    names_.push_back(name);
    if (name.rfind("conv", 0) == 0) {
      conv_count_ = std::max(conv_count_, std::atoi(name.c_str() + 4));
    } else if (name.rfind("bn", 0) == 0) {
      bn_count_ = std::max(bn_count_, std::atoi(name.c_str() + 2));
    }
    return *this;
  }

 private:
  Tensor<S> forward_one(std::size_t i, Tensor<S> x, Mode mode, Rng* rng,
                        Tape<S>* tape) const {
    return std::visit(
        [&](auto& l) -> Tensor<S> {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, ConvLayer<S>>) {
            return conv2d(x, l.kernel, l.sy, l.sx, l.pad);
          } else if constexpr (std::is_same_v<L, BatchNormLayer<S>>) {
            return porekit::batchnorm(x, const_cast<BatchNormParams<S>&>(l.params),
                                      mode, tape ? &tape->bn[i] : nullptr);
          } else if constexpr (std::is_same_v<L, ReluLayer>) {
            return porekit::relu(x);
          } else if constexpr (std::is_same_v<L, SigmoidLayer>) {
            return porekit::sigmoid(x);
          } else if constexpr (std::is_same_v<L, MaxPoolLayer>) {
            return maxpool2d(x, l.ph, l.pw, l.sy, l.sx,
                             tape ? &tape->pool[i] : nullptr);
          } else if constexpr (std::is_same_v<L, DropoutLayer>) {
            return porekit::dropout(x, l.rate, mode, rng,
                                    tape ? &tape->drop[i] : nullptr);
          } else {
            return l2_normalize(x, tape ? &tape->l2[i] : nullptr);
          }
        },
        const_cast<Layer<S>&>(layers_[i]));
  }

  Tensor<S> backward_one(std::size_t i, const Tape<S>& tape,
                         Tensor<S> grad) const {
    return std::visit(
        [&](auto& l) -> Tensor<S> {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, ConvLayer<S>>) {
            auto grads = conv2d_backward(tape.inputs[i], l.kernel, l.sy, l.sx,
                                         l.pad, grad);
            l.kernel.ensure_grad();
            l.kernel.grad() += grads.kernel_grad.array();
            return std::move(grads.input_grad);
          } else if constexpr (std::is_same_v<L, BatchNormLayer<S>>) {
            return batchnorm_backward(tape.inputs[i], l.params, tape.bn[i],
                                      grad);
          } else if constexpr (std::is_same_v<L, ReluLayer>) {
            return relu_backward(tape.inputs[i], grad);
          } else if constexpr (std::is_same_v<L, SigmoidLayer>) {
            return sigmoid_backward(tape.output_of(i), grad);
          } else if constexpr (std::is_same_v<L, MaxPoolLayer>) {
            return maxpool2d_backward(tape.inputs[i], tape.pool[i], grad);
          } else if constexpr (std::is_same_v<L, DropoutLayer>) {
            return dropout_backward(grad, l.rate, tape.drop[i]);
          } else {
            return l2_normalize_backward(tape.output_of(i), tape.l2[i], grad);
          }
        },
        const_cast<Layer<S>&>(layers_[i]));
  }

  std::vector<Layer<S>> layers_;
  std::vector<std::string> names_;
  int conv_count_ = 0;
  int bn_count_ = 0;
};

}  // namespace porekit

#endif  // POREKIT_NETWORK_HPP_
