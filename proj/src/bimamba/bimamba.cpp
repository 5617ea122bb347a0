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

#include "kwm/bimamba.hpp"

#include <cmath>
#include <vector>

#include "kwm/error.hpp"
#include "kwm/ops.hpp"
#include "kwm/random.hpp"
#include "kwm/ssm_scan.hpp"

namespace kwm {

namespace {

Tensor uniform_param(Shape shape, double bound, Rng& rng) {
  std::vector<float> v(shape_numel(shape));
  for (float& x : v) x = static_cast<float>(rng.uniform(-bound, bound));
  return Tensor(std::move(shape), std::move(v), true);
}

Tensor constant_param(Shape shape, float value) {
  return Tensor::full(std::move(shape), value, true);
}

// softplus(bias[e]) is log-spaced over [1e-3, 1e-1] across channels.
Tensor dt_bias_init(std::size_t channels) {
  constexpr double kMin = 1e-3, kMax = 1e-1;
  std::vector<float> v(channels);
  for (std::size_t e = 0; e < channels; ++e) {
    const double frac = channels > 1 ? static_cast<double>(e) / (channels - 1) : 0.0;
    const double dt = std::exp(std::log(kMin) + frac * (std::log(kMax) - std::log(kMin)));
    v[e] = static_cast<float>(dt + std::log(-std::expm1(-dt)));
  }
  return Tensor({channels}, std::move(v), true);
}

DirectionParams make_direction(const BlockConfig& c, bool with_conv, Rng& rng) {
  const std::size_t E = c.inner(), N = c.state, R = c.rank(), K = c.conv_width;
  DirectionParams p;
  if (with_conv) {
    p.conv_weight = uniform_param({E, K}, 1.0 / std::sqrt(static_cast<double>(K)), rng);
    p.conv_bias = constant_param({E}, 0.0f);
  }
  const double in_bound = 1.0 / std::sqrt(static_cast<double>(E));
  p.w_b = uniform_param({E, N}, in_bound, rng);
  p.w_c = uniform_param({E, N}, in_bound, rng);
  p.w_dt_down = uniform_param({E, R}, in_bound, rng);
  p.w_dt_up = uniform_param({R, E}, 1.0 / std::sqrt(static_cast<double>(R)), rng);
  p.dt_bias = dt_bias_init(E);
  p.a = ssm::real_diagonal_init(E, N);
  p.a.set_requires_grad(true);
  if (c.use_d_skip) p.d_skip = constant_param({E}, 1.0f);
  return p;
}

void add_direction(ParameterList& list, const std::string& prefix,
                   const DirectionParams& p) {
  if (p.conv_weight.defined()) {
    list.add(prefix + "conv.weight", p.conv_weight, true);
    list.add(prefix + "conv.bias", p.conv_bias, false);
  }
  list.add(prefix + "B_proj.weight", p.w_b, true);
  list.add(prefix + "C_proj.weight", p.w_c, true);
  list.add(prefix + "dt_down.weight", p.w_dt_down, true);
  list.add(prefix + "dt_up.weight", p.w_dt_up, true);
  list.add(prefix + "dt_up.bias", p.dt_bias, false);
  list.add(prefix + "A", p.a, false);
  if (p.d_skip.defined()) list.add(prefix + "D", p.d_skip, false);
}

void check_mode(const BiMambaBlock& block) {
  const auto mode = block.config.mode;
  const bool has_bwd = block.backward.has_value();
  if (!block.forward.conv_weight.defined()) {
    throw ConfigError("bimamba: forward branch needs a Conv1d");
  }
  if (mode == Directionality::kFoFo && has_bwd) {
    throw ConfigError("bimamba: mode Fo-Fo must not carry backward parameters");
  }
  if (mode != Directionality::kFoFo && !has_bwd) {
    throw ConfigError(std::string("bimamba: mode ") +
                      std::string(to_string(mode)) +
                      " needs backward parameters");
  }
  if (has_bwd) {
    const bool bwd_conv = block.backward->conv_weight.defined();
    if (mode == Directionality::kBiBi && !bwd_conv) {
      throw ConfigError("bimamba: mode Bi-Bi needs a backward Conv1d");
    }
    if (mode == Directionality::kFoBi && bwd_conv) {
      throw ConfigError("bimamba: mode Fo-Bi must not carry a backward Conv1d");
    }
  }
}

}  // namespace

std::string_view to_string(Directionality mode) {
  switch (mode) {
    case Directionality::kBiBi:
      return "Bi-Bi";
    case Directionality::kFoBi:
      return "Fo-Bi";
    case Directionality::kFoFo:
      return "Fo-Fo";
  }
  return "?";
}

Directionality parse_directionality(std::string_view text) {
  if (text == "Bi-Bi") return Directionality::kBiBi;
  if (text == "Fo-Bi") return Directionality::kFoBi;
  if (text == "Fo-Fo") return Directionality::kFoFo;
  throw ConfigError("unknown directionality mode: " + std::string(text));
}

void BlockConfig::validate() const {
  if (dim == 0) throw ConfigError("bimamba: model dimension must be positive");
  if (expand == 0 || state == 0 || conv_width == 0) {
    throw ConfigError("bimamba: expand, state and conv width must be positive");
  }
}

ParameterList BiMambaBlock::parameters(const std::string& prefix) const {
  ParameterList list;
  list.add(prefix + "norm.gain", norm_gain, false);
  list.add(prefix + "norm.bias", norm_bias, false);
  list.add(prefix + "in_x.weight", w_x, true);
  list.add(prefix + "in_z.weight", w_z, true);
  add_direction(list, prefix + "fwd.", forward);
  if (backward) add_direction(list, prefix + "bwd.", *backward);
  list.add(prefix + "out.weight", w_out, true);
  return list;
}

BiMambaBlock make_block(const BlockConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const std::size_t D = config.dim, E = config.inner();
  BiMambaBlock block;
  block.config = config;
  block.norm_gain = constant_param({D}, 1.0f);
  block.norm_bias = constant_param({D}, 0.0f);
  const double in_bound = 1.0 / std::sqrt(static_cast<double>(D));
  block.w_x = uniform_param({D, E}, in_bound, rng);
  block.w_z = uniform_param({D, E}, in_bound, rng);
  block.forward = make_direction(config, true, rng);
  if (config.mode != Directionality::kFoFo) {
    block.backward =
        make_direction(config, config.mode == Directionality::kBiBi, rng);
  }
  // Near-zero so a fresh stack starts close to the identity.
  block.w_out = uniform_param({E, D}, 1e-4, rng);
  return block;
}

BiMambaBlock make_block(std::size_t dim, Directionality mode,
                        std::uint64_t seed) {
  BlockConfig config;
  config.dim = dim;
  config.mode = mode;
  return make_block(config, seed);
}

Tensor branch_activation(const DirectionParams& params, const Tensor& x) {
  return silu(causal_conv1d(x, params.conv_weight, params.conv_bias));
}

Tensor branch_scan(const DirectionParams& params, const Tensor& activation) {
  ssm::SelectiveInputs in;
  in.x = activation;
  in.B_in = matmul(activation, params.w_b);
  in.C_in = matmul(activation, params.w_c);
  in.delta = softplus(
      add(matmul(matmul(activation, params.w_dt_down), params.w_dt_up),
          params.dt_bias));
  in.D_skip = params.d_skip;
  return ssm::selective_scan_seq(in, params.a);
}

Tensor bimamba_forward(const BiMambaBlock& block, const Tensor& x_prev) {
  check_mode(block);
  if (x_prev.dim() != 3 || x_prev.size(2) != block.config.dim) {
    throw DimensionError("bimamba: input " + shape_str(x_prev.shape()) +
                         " does not match model dim " +
                         std::to_string(block.config.dim));
  }
  const Tensor normed = layer_norm(x_prev, block.norm_gain, block.norm_bias);
  const Tensor x = matmul(normed, block.w_x);
  const Tensor gate = silu(matmul(normed, block.w_z));

  const Tensor act_fwd = branch_activation(block.forward, x);
  Tensor y = branch_scan(block.forward, act_fwd);

  if (block.backward) {
    Tensor act_bwd;
    switch (block.config.mode) {
      case Directionality::kBiBi:
        act_bwd = branch_activation(*block.backward, reverse_seq(x));
        break;
      case Directionality::kFoBi:
        act_bwd = block.config.fo_bi_shared_conv
                      ? reverse_seq(act_fwd)
                      : branch_activation(block.forward, reverse_seq(x));
        break;
      case Directionality::kFoFo:
        break;
    }
    y = add(y, reverse_seq(branch_scan(*block.backward, act_bwd)));
  }
  return add(matmul(mul(y, gate), block.w_out), x_prev);
}

std::size_t block_param_count(const BlockConfig& c) {
  c.validate();
  const std::size_t D = c.dim, E = c.inner(), N = c.state, R = c.rank(),
                    K = c.conv_width;
  const std::size_t conv = E * K + E;
  const std::size_t ssm_part =
      2 * E * N + 2 * E * R + E + E * N + (c.use_d_skip ? E : 0);
  std::size_t total = 2 * D + 3 * D * E + conv + ssm_part;
  if (c.mode == Directionality::kBiBi) total += conv + ssm_part;
  if (c.mode == Directionality::kFoBi) total += ssm_part;
  return total;
}

}  // namespace kwm
