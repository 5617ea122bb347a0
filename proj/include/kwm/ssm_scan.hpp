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

// Diagonal state space recurrence with input-dependent (selective) step
// size, input projection and output projection:
//
//   A_bar_t = exp(delta_t * A)          B_bar_t = delta_t * B_t
//   h_t     = A_bar_t * h_{t-1} + B_bar_t * x_t,   h_{-1} = 0
//   y_t     = <C_t, h_t> + D * x_t
//
// A is stored per channel as the diagonal of the state matrix, [E, N].

#include <utility>

#include "kwm/tensor.hpp"

namespace kwm::ssm {

struct SsmParams {
  Tensor A;  // [E, N], strictly negative at initialization
};

struct SelectiveInputs {
  Tensor delta;   // [B, L, E], positive
  Tensor B_in;    // [B, L, N]
  Tensor C_in;    // [B, L, N]
  Tensor x;       // [B, L, E]
  Tensor D_skip;  // [E]; undefined means no feedthrough
};

struct DiscretizedParams {
  Tensor A_bar;  // [B, L, E, N]
  Tensor B_bar;  // [B, L, E, N]
};

enum class InputDiscretization {
  kEuler,     // B_bar = delta * B, used by the scan
  kZohExact,  // B_bar = (delta A)^-1 (exp(delta A) - 1) delta B
};

// Materializes the discretized parameters (no gradient). Throws
// NumericDomainError when any delta is not strictly positive.
DiscretizedParams discretize(
    const Tensor& A, const Tensor& delta, const Tensor& B_in,
    InputDiscretization mode = InputDiscretization::kEuler);

// Sequential selective scan, differentiable in every input. Throws
// NumericDomainError if any input holds a NaN.
Tensor selective_scan_seq(const SelectiveInputs& inputs, const Tensor& A);

// Time-invariant path: y = x (*) K with K_j = sum_n C_n A_bar^j B_bar per
// channel. A_bar, B_bar: [E, N]; C: [N]; x: [L, E] (or [L] when E == 1).
// `D_skip` ([E]) adds the feedthrough term when defined. No gradient.
Tensor ssm_kernel_conv(const Tensor& A_bar, const Tensor& B_bar,
                       const Tensor& C, const Tensor& x,
                       const Tensor& D_skip = Tensor());

// Forward scan plus a backward-direction scan. `inputs_bwd` must already be
// built from the sequence-reversed activations; its scan output is reversed
// back so both results are aligned with the original time axis.
std::pair<Tensor, Tensor> selective_scan_bidirectional(
    const SelectiveInputs& inputs_fwd, const SelectiveInputs& inputs_bwd,
    const Tensor& A_fwd, const Tensor& A_bwd);

// A[e, n] = -(n + 1) for every channel.
Tensor real_diagonal_init(std::size_t channels, std::size_t state);

}  // namespace kwm::ssm
