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

// Compiled with -mavx2 -mfma. Nothing here may run before the dispatcher has
// confirmed CPU support.

#include <immintrin.h>

#include <cmath>
#include <vector>

#include "kwm/simd/kernels.hpp"

namespace kwm::simd::avx2 {

namespace {

// Cephes-style exp: range reduction by ln2, degree-5 polynomial, rebuild
// 2^n through the exponent bits. Within ~2 ulp over the clamped range.
inline __m256 exp256(__m256 x) {
  const __m256 hi = _mm256_set1_ps(88.3762626647949f);
  const __m256 lo = _mm256_set1_ps(-88.3762626647949f);
  const __m256 log2e = _mm256_set1_ps(1.44269504088896341f);
  const __m256 c1 = _mm256_set1_ps(0.693359375f);
  const __m256 c2 = _mm256_set1_ps(-2.12194440e-4f);
  const __m256 one = _mm256_set1_ps(1.0f);
  const __m256 half = _mm256_set1_ps(0.5f);

  x = _mm256_min_ps(_mm256_max_ps(x, lo), hi);
  __m256 fx = _mm256_fmadd_ps(x, log2e, half);
  fx = _mm256_floor_ps(fx);
  x = _mm256_fnmadd_ps(fx, c1, x);
  x = _mm256_fnmadd_ps(fx, c2, x);

  __m256 y = _mm256_set1_ps(1.9875691500e-4f);
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.3981999507e-3f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(8.3334519073e-3f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(4.1665795894e-2f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.6666665459e-1f));
  y = _mm256_fmadd_ps(y, x, half);
  const __m256 x2 = _mm256_mul_ps(x, x);
  y = _mm256_fmadd_ps(y, x2, _mm256_add_ps(x, one));

  // fx may be 128 at the top of the range; split the scale in two halves.
  __m256i n = _mm256_cvttps_epi32(fx);
  __m256i n1 = _mm256_srai_epi32(n, 1);
  __m256i n2 = _mm256_sub_epi32(n, n1);
  const __m256i bias = _mm256_set1_epi32(127);
  __m256 p1 = _mm256_castsi256_ps(
      _mm256_slli_epi32(_mm256_add_epi32(n1, bias), 23));
  __m256 p2 = _mm256_castsi256_ps(
      _mm256_slli_epi32(_mm256_add_epi32(n2, bias), 23));
  return _mm256_mul_ps(_mm256_mul_ps(y, p1), p2);
}

// Cephes-style natural log for x > 0.
inline __m256 log256(__m256 x) {
  const __m256 one = _mm256_set1_ps(1.0f);
  const __m256 half = _mm256_set1_ps(0.5f);
  const __m256 sqrthf = _mm256_set1_ps(0.707106781186547524f);

  __m256i xi = _mm256_castps_si256(x);
  __m256i e = _mm256_sub_epi32(_mm256_srli_epi32(xi, 23),
                               _mm256_set1_epi32(126));
  xi = _mm256_and_si256(xi, _mm256_set1_epi32(0x807fffff));
  xi = _mm256_or_si256(xi, _mm256_castps_si256(half));
  __m256 m = _mm256_castsi256_ps(xi);
  __m256 fe = _mm256_cvtepi32_ps(e);

  __m256 mask = _mm256_cmp_ps(m, sqrthf, _CMP_LT_OQ);
  __m256 tmp = _mm256_and_ps(m, mask);
  m = _mm256_sub_ps(m, one);
  fe = _mm256_sub_ps(fe, _mm256_and_ps(one, mask));
  m = _mm256_add_ps(m, tmp);

  const __m256 z = _mm256_mul_ps(m, m);
  __m256 y = _mm256_set1_ps(7.0376836292e-2f);
  y = _mm256_fmadd_ps(y, m, _mm256_set1_ps(-1.1514610310e-1f));
  y = _mm256_fmadd_ps(y, m, _mm256_set1_ps(1.1676998740e-1f));
  y = _mm256_fmadd_ps(y, m, _mm256_set1_ps(-1.2420140846e-1f));
  y = _mm256_fmadd_ps(y, m, _mm256_set1_ps(1.4249322787e-1f));
  y = _mm256_fmadd_ps(y, m, _mm256_set1_ps(-1.6668057665e-1f));
  y = _mm256_fmadd_ps(y, m, _mm256_set1_ps(2.0000714765e-1f));
  y = _mm256_fmadd_ps(y, m, _mm256_set1_ps(-2.4999993993e-1f));
  y = _mm256_fmadd_ps(y, m, _mm256_set1_ps(3.3333331174e-1f));
  y = _mm256_mul_ps(_mm256_mul_ps(y, m), z);
  y = _mm256_fmadd_ps(fe, _mm256_set1_ps(-2.12194440e-4f), y);
  y = _mm256_fnmadd_ps(z, half, y);
  m = _mm256_add_ps(m, y);
  return _mm256_fmadd_ps(fe, _mm256_set1_ps(0.693359375f), m);
}

inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  __m128 sh = _mm_movehdup_ps(lo);
  lo = _mm_add_ps(lo, sh);
  sh = _mm_movehl_ps(sh, lo);
  return _mm_cvtss_f32(_mm_add_ss(lo, sh));
}

void gemm(const float* a, const float* b, float* c, std::size_t m,
          std::size_t k, std::size_t p) {
  const std::size_t p16 = p - p % 16;
  const std::size_t p8 = p - p % 8;
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const float* a0 = a + i * k;
    float* c0 = c + i * p;
    std::size_t j = 0;
    for (; j < p16; j += 16) {
      __m256 acc[4][2];
      for (int r = 0; r < 4; ++r) {
        acc[r][0] = _mm256_loadu_ps(c0 + r * p + j);
        acc[r][1] = _mm256_loadu_ps(c0 + r * p + j + 8);
      }
      for (std::size_t kk = 0; kk < k; ++kk) {
        const __m256 b0 = _mm256_loadu_ps(b + kk * p + j);
        const __m256 b1 = _mm256_loadu_ps(b + kk * p + j + 8);
        for (int r = 0; r < 4; ++r) {
          const __m256 av = _mm256_broadcast_ss(a0 + r * k + kk);
          acc[r][0] = _mm256_fmadd_ps(av, b0, acc[r][0]);
          acc[r][1] = _mm256_fmadd_ps(av, b1, acc[r][1]);
        }
      }
      for (int r = 0; r < 4; ++r) {
        _mm256_storeu_ps(c0 + r * p + j, acc[r][0]);
        _mm256_storeu_ps(c0 + r * p + j + 8, acc[r][1]);
      }
    }
    for (; j < p8; j += 8) {
      __m256 acc[4];
      for (int r = 0; r < 4; ++r) acc[r] = _mm256_loadu_ps(c0 + r * p + j);
      for (std::size_t kk = 0; kk < k; ++kk) {
        const __m256 b0 = _mm256_loadu_ps(b + kk * p + j);
        for (int r = 0; r < 4; ++r) {
          acc[r] = _mm256_fmadd_ps(_mm256_broadcast_ss(a0 + r * k + kk), b0,
                                   acc[r]);
        }
      }
      for (int r = 0; r < 4; ++r) _mm256_storeu_ps(c0 + r * p + j, acc[r]);
    }
    for (; j < p; ++j) {
      for (int r = 0; r < 4; ++r) {
        float s = c0[r * p + j];
        for (std::size_t kk = 0; kk < k; ++kk) {
          s += a0[r * k + kk] * b[kk * p + j];
        }
        c0[r * p + j] = s;
      }
    }
  }
  for (; i < m; ++i) {
    const float* ai = a + i * k;
    float* ci = c + i * p;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const __m256 av = _mm256_broadcast_ss(ai + kk);
      const float* bk = b + kk * p;
      std::size_t j = 0;
      for (; j < p8; j += 8) {
        _mm256_storeu_ps(ci + j, _mm256_fmadd_ps(av, _mm256_loadu_ps(bk + j),
                                                 _mm256_loadu_ps(ci + j)));
      }
      for (; j < p; ++j) ci[j] += ai[kk] * bk[j];
    }
  }
}

template <typename VecOp>
void map(const float* x, float* y, std::size_t n, VecOp vec) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(y + i, vec(_mm256_loadu_ps(x + i)));
  if (i < n) {
    alignas(32) float buf[8] = {};
    for (std::size_t j = i; j < n; ++j) buf[j - i] = x[j];
    _mm256_store_ps(buf, vec(_mm256_load_ps(buf)));
    for (std::size_t j = i; j < n; ++j) y[j] = buf[j - i];
  }
}

void silu(const float* x, float* y, std::size_t n) {
  const __m256 one = _mm256_set1_ps(1.0f);
  const __m256 zero = _mm256_setzero_ps();
  map(x, y, n,
      [&](__m256 v) {
        __m256 e = exp256(_mm256_sub_ps(zero, v));
        return _mm256_div_ps(v, _mm256_add_ps(one, e));
      });
}

// log1p(u) for u in [0, 1], keeping precision when 1 + u rounds to 1.
inline __m256 log1p_unit(__m256 u) {
  const __m256 one = _mm256_set1_ps(1.0f);
  const __m256 w = _mm256_add_ps(one, u);
  const __m256 denom = _mm256_sub_ps(w, one);
  const __m256 exact = _mm256_cmp_ps(denom, _mm256_setzero_ps(), _CMP_EQ_OQ);
  const __m256 corrected =
      _mm256_div_ps(_mm256_mul_ps(log256(w), u),
                    _mm256_blendv_ps(denom, one, exact));
  return _mm256_blendv_ps(corrected, u, exact);
}

void softplus(const float* x, float* y, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  const __m256 limit = _mm256_set1_ps(20.0f);
  const __m256 sign = _mm256_set1_ps(-0.0f);
  map(x, y, n,
      [&](__m256 v) {
        const __m256 absv = _mm256_andnot_ps(sign, v);
        const __m256 u = exp256(_mm256_sub_ps(zero, absv));
        const __m256 r = _mm256_add_ps(_mm256_max_ps(v, zero), log1p_unit(u));
        return _mm256_blendv_ps(r, v, _mm256_cmp_ps(v, limit, _CMP_GT_OQ));
      });
}

void vexp(const float* x, float* y, std::size_t n) {
  map(x, y, n, [](__m256 v) { return exp256(v); });
}

// Wrapper so std::vector keeps the vector type's alignment attributes.
struct Lane {
  __m256 v;
};

void scan_forward(const ScanInputs& in, const ScanDims& dims, float* y,
                  float* states) {
  const std::size_t L = dims.length, E = dims.channels, N = dims.state;
  if (N % 8 != 0) {
    base::kTable.scan_forward(in, dims, y, states);
    return;
  }
  const std::size_t lanes = N / 8;
  std::vector<Lane> h(lanes);
  for (std::size_t e = 0; e < E; ++e) {
    for (auto& v : h) v.v = _mm256_setzero_ps();
    const float* a = in.a + e * N;
    const float skip = in.d ? in.d[e] : 0.0f;
    for (std::size_t t = 0; t < L; ++t) {
      const float dt = in.delta[t * E + e];
      const float xv = in.x[t * E + e];
      const __m256 vdt = _mm256_set1_ps(dt);
      const __m256 vdtx = _mm256_set1_ps(dt * xv);
      const float* bt = in.b + t * N;
      const float* ct = in.c + t * N;
      __m256 acc = _mm256_setzero_ps();
      for (std::size_t l = 0; l < lanes; ++l) {
        const __m256 abar = exp256(_mm256_mul_ps(vdt, _mm256_loadu_ps(a + 8 * l)));
        h[l].v = _mm256_fmadd_ps(abar, h[l].v,
                               _mm256_mul_ps(vdtx, _mm256_loadu_ps(bt + 8 * l)));
        acc = _mm256_fmadd_ps(_mm256_loadu_ps(ct + 8 * l), h[l].v, acc);
        if (states) _mm256_storeu_ps(states + (t * E + e) * N + 8 * l, h[l].v);
      }
      y[t * E + e] = hsum(acc) + skip * xv;
    }
  }
}

void scan_backward(const ScanInputs& in, const ScanDims& dims,
                   const float* states, const float* dy, const ScanGrads& g) {
  const std::size_t L = dims.length, E = dims.channels, N = dims.state;
  if (N % 8 != 0) {
    base::kTable.scan_backward(in, dims, states, dy, g);
    return;
  }
  const std::size_t lanes = N / 8;
  std::vector<Lane> carry(lanes);
  std::vector<Lane> da(lanes);
  for (std::size_t e = 0; e < E; ++e) {
    for (auto& v : carry) v.v = _mm256_setzero_ps();
    for (auto& v : da) v.v = _mm256_setzero_ps();
    const float* a = in.a + e * N;
    const float skip = in.d ? in.d[e] : 0.0f;
    float dskip = 0.0f;
    for (std::size_t t = L; t-- > 0;) {
      const std::size_t te = t * E + e;
      const float dt = in.delta[te];
      const float xv = in.x[te];
      const float gy = dy[te];
      const __m256 vdt = _mm256_set1_ps(dt);
      const __m256 vx = _mm256_set1_ps(xv);
      const __m256 vgy = _mm256_set1_ps(gy);
      const float* bt = in.b + t * N;
      const float* ct = in.c + t * N;
      const float* h = states + te * N;
      const float* h_prev = t > 0 ? states + ((t - 1) * E + e) * N : nullptr;
      float* dbt = g.db + t * N;
      float* dct = g.dc + t * N;
      __m256 ddt = _mm256_setzero_ps();
      __m256 dxv = _mm256_setzero_ps();
      for (std::size_t l = 0; l < lanes; ++l) {
        const __m256 av = _mm256_loadu_ps(a + 8 * l);
        const __m256 bv = _mm256_loadu_ps(bt + 8 * l);
        const __m256 cv = _mm256_loadu_ps(ct + 8 * l);
        const __m256 dh = _mm256_fmadd_ps(cv, vgy, carry[l].v);
        const __m256 abar = exp256(_mm256_mul_ps(vdt, av));
        _mm256_storeu_ps(dct + 8 * l,
                         _mm256_fmadd_ps(vgy, _mm256_loadu_ps(h + 8 * l),
                                         _mm256_loadu_ps(dct + 8 * l)));
        if (h_prev) {
          const __m256 dabar = _mm256_mul_ps(
              _mm256_mul_ps(dh, _mm256_loadu_ps(h_prev + 8 * l)), abar);
          ddt = _mm256_fmadd_ps(dabar, av, ddt);
          da[l].v = _mm256_fmadd_ps(dabar, vdt, da[l].v);
        }
        const __m256 dbbar = _mm256_mul_ps(dh, vx);
        ddt = _mm256_fmadd_ps(dbbar, bv, ddt);
        _mm256_storeu_ps(dbt + 8 * l, _mm256_fmadd_ps(dbbar, vdt,
                                                      _mm256_loadu_ps(dbt + 8 * l)));
        dxv = _mm256_fmadd_ps(_mm256_mul_ps(dh, vdt), bv, dxv);
        carry[l].v = _mm256_mul_ps(abar, dh);
      }
      dskip += gy * xv;
      g.ddelta[te] += hsum(ddt);
      g.dx[te] += skip * gy + hsum(dxv);
    }
    for (std::size_t l = 0; l < lanes; ++l) {
      float* dst = g.da + e * N + 8 * l;
      _mm256_storeu_ps(dst, _mm256_add_ps(_mm256_loadu_ps(dst), da[l].v));
    }
    g.dd[e] += dskip;
  }
}

const KernelTable kTable = {
    Backend::kAvx2, gemm,         silu,         softplus,
    vexp,           scan_forward, scan_backward,
};

}  // namespace

const KernelTable* table() { return &kTable; }

}  // namespace kwm::simd::avx2
