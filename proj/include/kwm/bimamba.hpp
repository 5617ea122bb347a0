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

// Bidirectional Mamba block: pre-norm, shared x/z input projections, one
// Conv1d + selective scan branch per direction, SiLU(z) gating, a shared
// output projection and the residual connection.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "kwm/tensor.hpp"

namespace kwm {

// Named <conv direction>-<scan direction>.
enum class Directionality {
  kBiBi,  // backward branch has its own Conv1d on the reversed sequence
  kFoBi,  // bidirectional scan fed by the single forward Conv1d
  kFoFo,  // forward branch only
};

std::string_view to_string(Directionality mode);
// Accepts "Bi-Bi", "Fo-Bi", "Fo-Fo". Throws ConfigError otherwise.
Directionality parse_directionality(std::string_view text);

struct BlockConfig {
  std::size_t dim = 192;
  std::size_t expand = 2;
  std::size_t state = 16;
  std::size_t conv_width = 4;
  std::size_t dt_rank = 0;  // 0 selects ceil(dim / 16)
  Directionality mode = Directionality::kBiBi;
  bool use_d_skip = true;
  // Fo-Bi only: true feeds the backward scan the reversed forward conv
  // output; false runs the forward conv over the reversed sequence instead.
  bool fo_bi_shared_conv = true;

  std::size_t inner() const { return expand * dim; }
  std::size_t rank() const { return dt_rank ? dt_rank : (dim + 15) / 16; }
  void validate() const;
};

struct DirectionParams {
  Tensor conv_weight;  // [E, K]; undefined when the branch reuses another conv
  Tensor conv_bias;    // [E]
  Tensor w_b;          // [E, N]
  Tensor w_c;          // [E, N]
  Tensor w_dt_down;    // [E, R]
  Tensor w_dt_up;      // [R, E]
  Tensor dt_bias;      // [E]
  Tensor a;            // [E, N]
  Tensor d_skip;       // [E]; undefined when use_d_skip is off
};

struct BiMambaBlock {
  BlockConfig config;
  Tensor norm_gain;  // [D]
  Tensor norm_bias;  // [D]
  Tensor w_x;        // [D, E]
  Tensor w_z;        // [D, E]
  DirectionParams forward;
  std::optional<DirectionParams> backward;
  Tensor w_out;  // [E, D]

  // Names are "<prefix>norm.gain", "<prefix>fwd.A", ...
  ParameterList parameters(const std::string& prefix) const;
};

BiMambaBlock make_block(const BlockConfig& config, std::uint64_t seed);
BiMambaBlock make_block(std::size_t dim, Directionality mode,
                        std::uint64_t seed);

// x_prev: [B, L, D] -> [B, L, D]. Throws ConfigError when the parameter set
// does not fit the block's directionality mode.
Tensor bimamba_forward(const BiMambaBlock& block, const Tensor& x_prev);

// SiLU(Conv1d(x)) over channels-last [B, L, E].
Tensor branch_activation(const DirectionParams& params, const Tensor& x);
// Selection projections plus the scan for one direction, on activations
// already in that direction's time order.
Tensor branch_scan(const DirectionParams& params, const Tensor& activation);

// Closed-form element count of make_block(config).
std::size_t block_param_count(const BlockConfig& config);

}  // namespace kwm
