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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "kwm/error.hpp"
#include "kwm/harness.hpp"

namespace kwm {

void TrainConfig::validate() const {
  if (epochs == 0 || batch == 0 || runs == 0 || !(lr0 > 0.0) || weight_decay < 0.0 ||
      warmup_epochs < 0.0 || label_smoothing < 0.0 || label_smoothing >= 1.0 ||
      beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0 || !(eps > 0.0) ||
      grad_clip < 0.0) {
    throw ConfigError("train: hyperparameters out of range");
  }
  if (warmup_epochs >= static_cast<double>(epochs)) {
    throw ConfigError("train: warmup_epochs must be smaller than epochs");
  }
}

KeyValues TrainConfig::to_kv() const {
  KeyValues kv;
  auto num = [](double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
  };
  kv.set("epochs", std::to_string(epochs));
  kv.set("batch", std::to_string(batch));
  kv.set("lr0", num(lr0));
  kv.set("warmup_epochs", num(warmup_epochs));
  kv.set("weight_decay", num(weight_decay));
  kv.set("label_smoothing", num(label_smoothing));
  kv.set("beta1", num(beta1));
  kv.set("beta2", num(beta2));
  kv.set("eps", num(eps));
  kv.set("grad_clip", num(grad_clip));
  kv.set("seed", std::to_string(seed));
  kv.set("runs", std::to_string(runs));
  kv.set("max_steps", std::to_string(max_steps));
  kv.set("augment", augment ? "true" : "false");
  kv.set("track_train_accuracy", track_train_accuracy ? "true" : "false");
  return kv;
}

TrainConfig TrainConfig::from_kv(const KeyValues& kv) {
  TrainConfig c;
  auto count = [&](const char* key, std::size_t fallback) {
    const std::int64_t v = kv.get_int(key, static_cast<std::int64_t>(fallback));
    if (v < 0) throw ConfigError(std::string("config key ") + key + " must be >= 0");
    return static_cast<std::size_t>(v);
  };
  c.epochs = count("epochs", c.epochs);
  c.batch = count("batch", c.batch);
  c.lr0 = kv.get_double("lr0", c.lr0);
  c.warmup_epochs = kv.get_double("warmup_epochs", c.warmup_epochs);
  c.weight_decay = kv.get_double("weight_decay", c.weight_decay);
  c.label_smoothing = kv.get_double("label_smoothing", c.label_smoothing);
  c.beta1 = kv.get_double("beta1", c.beta1);
  c.beta2 = kv.get_double("beta2", c.beta2);
  c.eps = kv.get_double("eps", c.eps);
  c.grad_clip = kv.get_double("grad_clip", c.grad_clip);
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", 0));
  c.runs = count("runs", c.runs);
  c.max_steps = count("max_steps", c.max_steps);
  c.augment = kv.get_bool("augment", c.augment);
  c.track_train_accuracy = kv.get_bool("track_train_accuracy", c.track_train_accuracy);
  return c;
}

double lr_schedule(std::size_t step, std::size_t steps_per_epoch, const TrainConfig& cfg) {
  const double warmup = cfg.warmup_epochs * static_cast<double>(steps_per_epoch);
  const double total = static_cast<double>(cfg.epochs * steps_per_epoch);
  const double s = static_cast<double>(step);
  if (s < warmup) return cfg.lr0 * s / warmup;
  if (total <= warmup) return cfg.lr0;
  const double progress = std::min(1.0, (s - warmup) / (total - warmup));
  return cfg.lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

AdamW::AdamW(const ParameterList& params, AdamWConfig config)
    : params_(params), config_(config) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

void AdamW::zero_grad() { params_.zero_grad(); }

void AdamW::step(double lr) {
  double norm2 = 0.0;
  for (const auto& p : params_) {
    for (float g : p.tensor.grad()) {
      if (!std::isfinite(g)) {
        throw NumericDomainError("non-finite gradient in parameter " + p.name);
      }
      norm2 += static_cast<double>(g) * g;
    }
  }
  double clip = 1.0;
  if (config_.grad_clip > 0.0 && std::sqrt(norm2) > config_.grad_clip) {
    clip = config_.grad_clip / std::sqrt(norm2);
  }

  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  std::size_t k = 0;
  for (const auto& p : params_) {
    Tensor t = p.tensor;
    auto values = t.mutable_data();
    auto grad = t.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    ++k;
    const double decay = p.decay ? lr * config_.weight_decay : 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad.empty() ? 0.0 : clip * grad[i];
      double x = values[i];
      x -= decay * x;
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      x -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.eps);
      values[i] = static_cast<float>(x);
    }
  }
}

}  // namespace kwm
