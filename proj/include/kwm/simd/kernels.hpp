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

// Data-parallel inner loops behind the tensor ops and the selective scan.
// Every kernel has a portable scalar reference in simd::base; wider variants
// must agree with it to float rounding (see tests/test_kernels.cpp). The
// active table is chosen once at startup from the CPU features, and can be
// forced with KWM_SIMD=scalar|avx2.

#include <cstddef>
#include <string_view>

namespace kwm::simd {

enum class Backend { kScalar, kAvx2 };

std::string_view backend_name(Backend backend);

// Per-sequence views for one scan lane group. Layouts (row-major):
//   x, delta: [length, channels]   a: [channels, state]
//   b, c:     [length, state]      d: [channels] (may be null -> 0)
struct ScanInputs {
  const float* x;
  const float* delta;
  const float* a;
  const float* b;
  const float* c;
  const float* d;
};

struct ScanDims {
  std::size_t length;
  std::size_t channels;
  std::size_t state;
};

// Gradient accumulators with the same layouts as ScanInputs; all non-null.
// da and dd are accumulated across calls (shared parameters), the rest too.
struct ScanGrads {
  float* dx;
  float* ddelta;
  float* da;
  float* db;
  float* dc;
  float* dd;
};

struct KernelTable {
  Backend backend;

  // c[m,p] += a[m,k] * b[k,p]
  void (*gemm)(const float* a, const float* b, float* c, std::size_t m,
               std::size_t k, std::size_t p);
  // y = x * sigmoid(x)
  void (*silu)(const float* x, float* y, std::size_t n);
  // y = log(1 + exp(x)), y = x for x > 20
  void (*softplus)(const float* x, float* y, std::size_t n);
  void (*exp)(const float* x, float* y, std::size_t n);

  // h_t = exp(delta_t * a) * h_{t-1} + delta_t * b_t * x_t, h_{-1} = 0
  // y_t = <c_t, h_t> + d * x_t
  // `states` ([length, channels, state]) receives every h_t when non-null.
  void (*scan_forward)(const ScanInputs& in, const ScanDims& dims, float* y,
                       float* states);
  // Reverse pass for scan_forward given the recorded states.
  void (*scan_backward)(const ScanInputs& in, const ScanDims& dims,
                        const float* states, const float* dy,
                        const ScanGrads& grads);
};

const KernelTable& kernels();
const KernelTable& scalar_kernels();
// nullptr when not compiled in or the CPU lacks AVX2+FMA.
const KernelTable* avx2_kernels();

Backend active_backend();
// Throws ConfigError if the backend is unavailable on this machine.
void set_backend(Backend backend);

namespace base {
extern const KernelTable kTable;
}

namespace avx2 {
// Defined only when the AVX2 translation unit is compiled in.
const KernelTable* table();
}

}  // namespace kwm::simd
