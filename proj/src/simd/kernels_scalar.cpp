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

#include <cmath>
#include <vector>

#include "kwm/simd/kernels.hpp"

namespace kwm::simd::base {

namespace {

void gemm(const float* a, const float* b, float* c, std::size_t m,
          std::size_t k, std::size_t p) {
  for (std::size_t i = 0; i < m; ++i) {
    float* ci = c + i * p;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const float av = a[i * k + kk];
      const float* bk = b + kk * p;
      for (std::size_t j = 0; j < p; ++j) ci[j] += av * bk[j];
    }
  }
}

void silu(const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] / (1.0f + std::exp(-x[i]));
}

void softplus(const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = x[i] > 20.0f ? x[i] : std::log1p(std::exp(x[i]));
  }
}

void vexp(const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::exp(x[i]);
}

void scan_forward(const ScanInputs& in, const ScanDims& dims, float* y,
                  float* states) {
  const std::size_t L = dims.length, E = dims.channels, N = dims.state;
  std::vector<float> h(N);
  for (std::size_t e = 0; e < E; ++e) {
    std::fill(h.begin(), h.end(), 0.0f);
    const float* a = in.a + e * N;
    const float skip = in.d ? in.d[e] : 0.0f;
    for (std::size_t t = 0; t < L; ++t) {
      const float dt = in.delta[t * E + e];
      const float xv = in.x[t * E + e];
      const float* bt = in.b + t * N;
      const float* ct = in.c + t * N;
      float acc = 0.0f;
      for (std::size_t n = 0; n < N; ++n) {
        h[n] = std::exp(dt * a[n]) * h[n] + dt * bt[n] * xv;
        acc += ct[n] * h[n];
      }
      if (states) std::copy(h.begin(), h.end(), states + (t * E + e) * N);
      y[t * E + e] = acc + skip * xv;
    }
  }
}

void scan_backward(const ScanInputs& in, const ScanDims& dims,
                   const float* states, const float* dy,
                   const ScanGrads& g) {
  const std::size_t L = dims.length, E = dims.channels, N = dims.state;
  std::vector<float> carry(N);
  for (std::size_t e = 0; e < E; ++e) {
    std::fill(carry.begin(), carry.end(), 0.0f);
    const float* a = in.a + e * N;
    float* da = g.da + e * N;
    const float skip = in.d ? in.d[e] : 0.0f;
    float dskip = 0.0f;
    for (std::size_t t = L; t-- > 0;) {
      const std::size_t te = t * E + e;
      const float dt = in.delta[te];
      const float xv = in.x[te];
      const float gy = dy[te];
      const float* bt = in.b + t * N;
      const float* ct = in.c + t * N;
      const float* h = states + te * N;
      const float* h_prev = t > 0 ? states + ((t - 1) * E + e) * N : nullptr;
      float* dbt = g.db + t * N;
      float* dct = g.dc + t * N;
      float ddt = 0.0f;
      float dxv = skip * gy;
      for (std::size_t n = 0; n < N; ++n) {
        const float dh = carry[n] + ct[n] * gy;
        const float abar = std::exp(dt * a[n]);
        dct[n] += gy * h[n];
        if (h_prev) {
          const float dabar = dh * h_prev[n] * abar;
          ddt += dabar * a[n];
          da[n] += dabar * dt;
        }
        const float dbbar = dh * xv;
        ddt += dbbar * bt[n];
        dbt[n] += dbbar * dt;
        dxv += dh * dt * bt[n];
        carry[n] = abar * dh;
      }
      dskip += gy * xv;
      g.ddelta[te] += ddt;
      g.dx[te] += dxv;
    }
    g.dd[e] += dskip;
  }
}

}  // namespace

const KernelTable kTable = {
    Backend::kScalar, gemm,         silu,         softplus,
    vexp,             scan_forward, scan_backward,
};

}  // namespace kwm::simd::base
