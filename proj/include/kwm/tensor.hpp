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

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace kwm {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {
struct Node;
}

// Dense row-major float32 array with optional reverse-mode gradient
// tracking. A Tensor is a cheap handle; copies share storage. Values are not
// modified by any op after creation; only parameters are updated in place by
// the optimizer through mutable_data().
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<float> values, bool requires_grad = false);
  // Keeps one-element lists like Tensor({1}, {2.0f}) off the bool overload.
  Tensor(Shape shape, std::initializer_list<float> values, bool requires_grad = false)
      : Tensor(std::move(shape), std::vector<float>(values), requires_grad) {}

  static Tensor scalar(float value, bool requires_grad = false);
  static Tensor full(Shape shape, float value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim() const { return shape().size(); }
  // Negative axes count from the end.
  std::size_t size(int axis) const;
  std::size_t numel() const;

  std::span<const float> data() const;
  std::span<float> mutable_data();
  float item() const;
  float operator[](std::size_t flat_index) const { return data()[flat_index]; }

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool has_grad() const;
  // Empty span when no gradient has been accumulated yet.
  std::span<const float> grad() const;
  std::span<float> mutable_grad();
  void zero_grad();

  // Same values, no history, no gradient.
  Tensor detach() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Runs reverse-mode differentiation from a scalar. Leaf tensors with
// requires_grad accumulate into their grad buffer across calls.
void backward(const Tensor& loss);

bool grad_enabled();

// Disables tape recording for the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// A named trainable tensor. `decay` selects decoupled weight decay.
struct Parameter {
  std::string name;
  Tensor tensor;
  bool decay = false;
};

class ParameterList {
 public:
  // Throws ConfigError on a duplicate name.
  void add(std::string name, const Tensor& tensor, bool decay);
  void append(const ParameterList& other);

  const std::vector<Parameter>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  const Parameter* find(const std::string& name) const;
  std::size_t element_count() const;
  void zero_grad();

  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

 private:
  std::vector<Parameter> items_;
};

}  // namespace kwm
