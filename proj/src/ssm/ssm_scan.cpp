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

#include "kwm/ssm_scan.hpp"

#include <cmath>
#include <vector>

#include "kwm/autograd.hpp"
#include "kwm/error.hpp"
#include "kwm/ops.hpp"
#include "kwm/simd/kernels.hpp"

namespace kwm::ssm {

using detail::grad_ptr;

namespace {

void require_shape(const Tensor& t, const Shape& expected, const char* what) {
  if (!t.defined() || t.shape() != expected) {
    throw DimensionError(std::string("selective scan: ") + what + " has shape " +
                         (t.defined() ? shape_str(t.shape()) : "undefined") +
                         ", expected " + shape_str(expected));
  }
}

void require_finite(const Tensor& t, const char* what) {
  for (float v : t.data()) {
    if (std::isnan(v)) {
      throw NumericDomainError(std::string("selective scan: NaN in ") + what);
    }
  }
}

void add_into(float* dst, const std::vector<float>& src) {
  if (!dst) return;
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}

}  // namespace

DiscretizedParams discretize(const Tensor& A, const Tensor& delta,
                             const Tensor& B_in, InputDiscretization mode) {
  if (A.dim() != 2 || delta.dim() != 3 || B_in.dim() != 3 ||
      delta.size(2) != A.size(0) || B_in.size(2) != A.size(1) ||
      delta.size(0) != B_in.size(0) || delta.size(1) != B_in.size(1)) {
    throw DimensionError("discretize: incompatible shapes A" +
                         shape_str(A.shape()) + " delta" +
                         shape_str(delta.shape()) + " B" +
                         shape_str(B_in.shape()));
  }
  for (float d : delta.data()) {
    if (!(d > 0.0f)) {
      throw NumericDomainError("discretize: step size must be positive, got " +
                               std::to_string(d));
    }
  }
  const std::size_t Bsz = delta.size(0), L = delta.size(1), E = A.size(0),
                    N = A.size(1);
  auto av = A.data();
  auto dv = delta.data();
  auto bv = B_in.data();
  std::vector<float> abar(Bsz * L * E * N), bbar(Bsz * L * E * N);
  for (std::size_t b = 0; b < Bsz; ++b) {
    for (std::size_t t = 0; t < L; ++t) {
      for (std::size_t e = 0; e < E; ++e) {
        const double dt = dv[(b * L + t) * E + e];
        for (std::size_t n = 0; n < N; ++n) {
          const std::size_t o = ((b * L + t) * E + e) * N + n;
          const double a = av[e * N + n];
          const double bin = bv[(b * L + t) * N + n];
          abar[o] = static_cast<float>(std::exp(dt * a));
          if (mode == InputDiscretization::kEuler || a == 0.0) {
            bbar[o] = static_cast<float>(dt * bin);
          } else {
            bbar[o] = static_cast<float>(std::expm1(dt * a) / a * bin);
          }
        }
      }
    }
  }
  Shape shape{Bsz, L, E, N};
  return {Tensor(shape, std::move(abar)), Tensor(shape, std::move(bbar))};
}

Tensor selective_scan_seq(const SelectiveInputs& in, const Tensor& A) {
  if (!A.defined() || A.dim() != 2 || !in.x.defined() || in.x.dim() != 3) {
    throw DimensionError("selective scan: A must be [E,N] and x [B,L,E]");
  }
  const std::size_t Bsz = in.x.size(0), L = in.x.size(1), E = in.x.size(2),
                    N = A.size(1);
  require_shape(A, {E, N}, "A");
  require_shape(in.delta, {Bsz, L, E}, "delta");
  require_shape(in.B_in, {Bsz, L, N}, "B");
  require_shape(in.C_in, {Bsz, L, N}, "C");
  const bool has_skip = in.D_skip.defined();
  if (has_skip) require_shape(in.D_skip, {E}, "D");
  require_finite(in.x, "x");
  require_finite(in.delta, "delta");
  require_finite(A, "A");
  require_finite(in.B_in, "B");
  require_finite(in.C_in, "C");
  if (has_skip) require_finite(in.D_skip, "D");

  const simd::ScanDims dims{L, E, N};
  const bool record = grad_enabled() &&
                      (in.x.requires_grad() || in.delta.requires_grad() ||
                       A.requires_grad() || in.B_in.requires_grad() ||
                       in.C_in.requires_grad() ||
                       (has_skip && in.D_skip.requires_grad()));
  auto states = std::make_shared<std::vector<float>>();
  if (record) states->resize(Bsz * L * E * N);

  auto lane = [&, has_skip](std::size_t b) {
    return simd::ScanInputs{
        in.x.data().data() + b * L * E,     in.delta.data().data() + b * L * E,
        A.data().data(),                    in.B_in.data().data() + b * L * N,
        in.C_in.data().data() + b * L * N,  has_skip ? in.D_skip.data().data() : nullptr};
  };

  const auto& kern = simd::kernels();
  std::vector<float> y(Bsz * L * E);
  for (std::size_t b = 0; b < Bsz; ++b) {
    kern.scan_forward(lane(b), dims, y.data() + b * L * E,
                      record ? states->data() + b * L * E * N : nullptr);
  }

  std::vector<Tensor> inputs{in.x, in.delta, A, in.B_in, in.C_in};
  if (has_skip) inputs.push_back(in.D_skip);
  SelectiveInputs saved = in;
  Tensor a_saved = A;
  return detail::make_result(
      Shape{Bsz, L, E}, std::move(y), inputs,
      [saved, a_saved, states, dims, Bsz, has_skip](std::span<const float> g) {
        const std::size_t L = dims.length, E = dims.channels, N = dims.state;
        std::vector<float> dx(Bsz * L * E), ddelta(Bsz * L * E), da(E * N),
            db(Bsz * L * N), dc(Bsz * L * N), dd(E);
        const auto& kern = simd::kernels();
        for (std::size_t b = 0; b < Bsz; ++b) {
          simd::ScanInputs lane{
              saved.x.data().data() + b * L * E,
              saved.delta.data().data() + b * L * E,
              a_saved.data().data(),
              saved.B_in.data().data() + b * L * N,
              saved.C_in.data().data() + b * L * N,
              has_skip ? saved.D_skip.data().data() : nullptr};
          simd::ScanGrads grads{dx.data() + b * L * E, ddelta.data() + b * L * E,
                                da.data(),             db.data() + b * L * N,
                                dc.data() + b * L * N, dd.data()};
          kern.scan_backward(lane, dims, states->data() + b * L * E * N,
                             g.data() + b * L * E, grads);
        }
        add_into(grad_ptr(saved.x), dx);
        add_into(grad_ptr(saved.delta), ddelta);
        add_into(grad_ptr(a_saved), da);
        add_into(grad_ptr(saved.B_in), db);
        add_into(grad_ptr(saved.C_in), dc);
        if (has_skip) add_into(grad_ptr(saved.D_skip), dd);
      });
}

Tensor ssm_kernel_conv(const Tensor& A_bar, const Tensor& B_bar,
                       const Tensor& C, const Tensor& x, const Tensor& D_skip) {
  if (A_bar.dim() != 2 || B_bar.shape() != A_bar.shape() || C.dim() != 1 ||
      C.size(0) != A_bar.size(1)) {
    throw DimensionError("ssm_kernel_conv: incompatible A_bar" +
                         shape_str(A_bar.shape()) + " B_bar" +
                         shape_str(B_bar.shape()) + " C" + shape_str(C.shape()));
  }
  const std::size_t E = A_bar.size(0), N = A_bar.size(1);
  const bool flat = x.dim() == 1;
  if (!(flat && E == 1) && !(x.dim() == 2 && x.size(1) == E)) {
    throw DimensionError("ssm_kernel_conv: x" + shape_str(x.shape()) +
                         " does not match " + std::to_string(E) + " channels");
  }
  const std::size_t L = x.size(0);
  if (L == 0) throw UsageError("ssm_kernel_conv: sequence length must be positive");
  if (D_skip.defined() && D_skip.shape() != Shape{E}) {
    throw DimensionError("ssm_kernel_conv: D" + shape_str(D_skip.shape()));
  }
  auto av = A_bar.data();
  auto bv = B_bar.data();
  auto cv = C.data();
  auto xv = x.data();

  // kernel[e][j] = sum_n C_n A_bar[e,n]^j B_bar[e,n]
  std::vector<double> kernel(E * L);
  for (std::size_t e = 0; e < E; ++e) {
    for (std::size_t n = 0; n < N; ++n) {
      double power = 1.0;
      const double base = av[e * N + n];
      const double cb = static_cast<double>(cv[n]) * bv[e * N + n];
      for (std::size_t j = 0; j < L; ++j) {
        kernel[e * L + j] += cb * power;
        power *= base;
      }
    }
  }
  std::vector<float> y(L * E);
  for (std::size_t e = 0; e < E; ++e) {
    const double skip = D_skip.defined() ? D_skip.data()[e] : 0.0;
    for (std::size_t t = 0; t < L; ++t) {
      double acc = skip * xv[t * E + e];
      for (std::size_t j = 0; j <= t; ++j) {
        acc += kernel[e * L + j] * xv[(t - j) * E + e];
      }
      y[t * E + e] = static_cast<float>(acc);
    }
  }
  return Tensor(x.shape(), std::move(y));
}

std::pair<Tensor, Tensor> selective_scan_bidirectional(
    const SelectiveInputs& inputs_fwd, const SelectiveInputs& inputs_bwd,
    const Tensor& A_fwd, const Tensor& A_bwd) {
  Tensor y_fwd = selective_scan_seq(inputs_fwd, A_fwd);
  Tensor y_bwd = reverse_seq(selective_scan_seq(inputs_bwd, A_bwd), 1);
  return {y_fwd, y_bwd};
}

Tensor real_diagonal_init(std::size_t channels, std::size_t state) {
  std::vector<float> a(channels * state);
  for (std::size_t e = 0; e < channels; ++e) {
    for (std::size_t n = 0; n < state; ++n) {
      a[e * state + n] = -static_cast<float>(n + 1);
    }
  }
  return Tensor({channels, state}, std::move(a));
}

}  // namespace kwm::ssm
