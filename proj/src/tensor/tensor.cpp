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

#include "kwm/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "kwm/autograd.hpp"
#include "kwm/error.hpp"

namespace kwm {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

Tensor::Tensor(Shape shape, bool requires_grad)
    : Tensor(shape, std::vector<float>(shape_numel(shape), 0.0f),
             requires_grad) {}

Tensor::Tensor(Shape shape, std::vector<float> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor of shape " + shape_str(shape) + " needs " +
                         std::to_string(shape_numel(shape)) +
                         " values, got " + std::to_string(values.size()));
  }
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->data = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(float value, bool requires_grad) {
  return Tensor(Shape{}, std::vector<float>{value}, requires_grad);
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
  std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<float>(n, value), requires_grad);
}

const Shape& Tensor::shape() const {
  if (!node_) throw UsageError("access to an undefined tensor");
  return node_->shape;
}

std::size_t Tensor::size(int axis) const {
  const Shape& s = shape();
  int rank = static_cast<int>(s.size());
  int a = axis < 0 ? axis + rank : axis;
  if (a < 0 || a >= rank) {
    throw DimensionError("axis " + std::to_string(axis) +
                         " out of range for shape " + shape_str(s));
  }
  return s[static_cast<std::size_t>(a)];
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::span<const float> Tensor::data() const {
  shape();
  return node_->data;
}

std::span<float> Tensor::mutable_data() {
  shape();
  return node_->data;
}

float Tensor::item() const {
  if (numel() != 1) {
    throw UsageError("item() on tensor of shape " + shape_str(shape()));
  }
  return node_->data[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
  shape();
  node_->requires_grad = value;
}

bool Tensor::has_grad() const {
  return node_ && node_->grad.size() == node_->data.size() &&
         !node_->data.empty();
}

std::span<const float> Tensor::grad() const {
  if (!has_grad()) return {};
  return node_->grad;
}

std::span<float> Tensor::mutable_grad() {
  shape();
  return node_->grad_buffer();
}

void Tensor::zero_grad() {
  if (node_) std::fill(node_->grad.begin(), node_->grad.end(), 0.0f);
}

Tensor Tensor::detach() const {
  return Tensor(shape(), node_->data, false);
}

namespace detail {

Tensor make_result(Shape shape, std::vector<float> values,
                   std::vector<Tensor> inputs, BackwardFn fn) {
  Tensor out(std::move(shape), std::move(values), false);
  if (!g_grad_enabled) return out;
  bool any = std::any_of(inputs.begin(), inputs.end(),
                         [](const Tensor& t) { return t.requires_grad(); });
  if (!any) return out;
  Node& node = *out.node();
  node.requires_grad = true;
  node.parents.reserve(inputs.size());
  for (const Tensor& t : inputs) {
    if (t.requires_grad()) node.parents.push_back(t.node());
  }
  node.backward_fn = std::move(fn);
  return out;
}

}  // namespace detail

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw UsageError("backward() needs a scalar loss, got shape " +
                     (loss.defined() ? shape_str(loss.shape()) : "undefined"));
  }
  if (!loss.requires_grad()) {
    throw UsageError("backward() on a loss that does not require grad");
  }

  // Iterative post-order DFS gives a topological order (inputs first).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Interior gradients are per call; leaves accumulate.
  for (detail::Node* node : order) {
    if (node->backward_fn) {
      node->grad.assign(node->data.size(), 0.0f);
    }
  }
  loss.node()->grad_buffer()[0] += 1.0f;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backward_fn) node->backward_fn(node->grad);
  }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}

NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void ParameterList::add(std::string name, const Tensor& tensor, bool decay) {
  if (find(name) != nullptr) {
    throw ConfigError("duplicate parameter name: " + name);
  }
  items_.push_back(Parameter{std::move(name), tensor, decay});
}

void ParameterList::append(const ParameterList& other) {
  for (const Parameter& p : other) add(p.name, p.tensor, p.decay);
}

const Parameter* ParameterList::find(const std::string& name) const {
  for (const Parameter& p : items_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::size_t ParameterList::element_count() const {
  std::size_t n = 0;
  for (const Parameter& p : items_) n += p.tensor.numel();
  return n;
}

void ParameterList::zero_grad() {
  for (const Parameter& p : items_) {
    Tensor t = p.tensor;
    t.zero_grad();
  }
}

}  // namespace kwm
