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

// Building blocks for ops that record themselves on the tape. Only op
// implementations should need this header.

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "kwm/tensor.hpp"

namespace kwm::detail {

// Receives the gradient of the op output and accumulates into inputs.
using BackwardFn = std::function<void(std::span<const float> grad_out)>;

struct Node {
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward_fn;

  std::span<float> grad_buffer() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0f);
    return grad;
  }
};

// Wraps op output values. History is attached only when recording is enabled
// and at least one input requires a gradient.
Tensor make_result(Shape shape, std::vector<float> values,
                   std::vector<Tensor> inputs, BackwardFn fn);

// Gradient accumulator of an input, or nullptr when it needs none.
inline float* grad_ptr(const Tensor& t) {
  return t.requires_grad() ? t.node()->grad_buffer().data() : nullptr;
}

}  // namespace kwm::detail
