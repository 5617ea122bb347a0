// Copyright 2026 The kwm Authors.
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

#pragma once

// Differentiable tensor operations. Broadcasting is deliberately narrow: the
// second operand of a binary op must either match the first exactly or equal
// a trailing suffix of its shape (a bias vector against activations, a
// positional table against a batch).

#include <cstddef>
#include <span>
#include <vector>

#include "kwm/tensor.hpp"

namespace kwm {

// [..., M, K] x [K, P] -> [..., M, P]
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, float factor);

Tensor neg(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor silu(const Tensor& x);
// Tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
Tensor gelu(const Tensor& x);
// log(1 + exp(x)); returns x unchanged above 20.
Tensor softplus(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
Tensor slice(const Tensor& x, int axis, std::size_t start, std::size_t length);
Tensor concat(std::span<const Tensor> parts, int axis);
// Reverses the order of entries along `axis` (the sequence axis of [B,L,E]).
Tensor reverse_seq(const Tensor& x, int axis = 1);
Tensor transpose(const Tensor& x, int axis0, int axis1);
// out.flat[i] = x.flat[index[i]]; gradients scatter-add back.
Tensor gather(const Tensor& x, std::vector<std::size_t> index, Shape shape);
// Repeats x along a new leading axis of size `count`.
Tensor repeat_leading(const Tensor& x, std::size_t count);

// Normalizes the last axis to zero mean and unit variance, then applies
// gain and bias (both shaped like the last axis). Throws ConfigError if
// eps <= 0.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  float eps = 1e-5f);

// Depthwise causal convolution over [B, E, L]. kernel: [E, K], bias: [E].
// Output position t reads inputs t-K+1 .. t with zero padding on the left.
Tensor conv1d_depthwise(const Tensor& x, const Tensor& kernel,
                        const Tensor& bias);
// Same convolution on channels-last activations [B, L, E].
Tensor causal_conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias);

// Mean over the batch of (1 - s) * CE(target) + s * mean_c CE(c).
// logits: [B, C]. Throws DataError for a target outside [0, C).
Tensor cross_entropy_label_smoothed(const Tensor& logits,
                                    std::span<const int> targets,
                                    float smoothing);

}  // namespace kwm
