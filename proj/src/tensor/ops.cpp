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

#include "kwm/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kwm/autograd.hpp"
#include "kwm/error.hpp"
#include "kwm/simd/kernels.hpp"

namespace kwm {

using detail::grad_ptr;
using detail::make_result;

namespace {

std::size_t normalize_axis(int axis, std::size_t rank) {
  int r = static_cast<int>(rank);
  int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw DimensionError("axis " + std::to_string(axis) +
                         " out of range for rank " + std::to_string(rank));
  }
  return static_cast<std::size_t>(a);
}

// Number of times `b` tiles over `a` under suffix broadcasting.
std::size_t broadcast_repeats(const Shape& a, const Shape& b,
                              const char* op) {
  bool ok = b.size() <= a.size() &&
            std::equal(b.begin(), b.end(), a.end() - b.size());
  if (!ok) {
    throw DimensionError(std::string(op) + ": cannot broadcast " +
                         shape_str(b) + " against " + shape_str(a));
  }
  return shape_numel(a) / std::max<std::size_t>(shape_numel(b), 1);
}

void transpose_2d(const float* src, float* dst, std::size_t rows,
                  std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) dst[j * rows + i] = src[i * cols + j];
  }
}

template <typename Forward, typename Derivative>
Tensor unary(const Tensor& x, Forward forward, Derivative derivative) {
  std::vector<float> out(x.numel());
  forward(x.data().data(), out.data(), out.size());
  Tensor xin = x;
  auto values = std::make_shared<std::vector<float>>();
  if (grad_enabled() && x.requires_grad()) *values = out;
  return make_result(x.shape(), std::move(out), {x},
                     [xin, values, derivative](std::span<const float> g) {
                       float* dx = grad_ptr(xin);
                       if (!dx) return;
                       auto xv = xin.data();
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         dx[i] += g[i] * derivative(xv[i], (*values)[i]);
                       }
                     });
}

inline float sigmoid(float v) { return 1.0f / (1.0f + std::exp(-v)); }

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.dim() < 2 || b.dim() != 2 || a.size(-1) != b.size(0)) {
    throw DimensionError("matmul: inner dimensions disagree for " +
                         shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const std::size_t k = b.size(0), p = b.size(1);
  const std::size_t rows = a.numel() / k;
  Shape shape = a.shape();
  shape.back() = p;
  std::vector<float> out(rows * p, 0.0f);
  simd::kernels().gemm(a.data().data(), b.data().data(), out.data(), rows, k,
                       p);
  return make_result(std::move(shape), std::move(out), {a, b},
                     [a, b, rows, k, p](std::span<const float> g) {
                       const auto& kern = simd::kernels();
                       if (float* da = grad_ptr(a)) {
                         std::vector<float> bt(k * p);
                         transpose_2d(b.data().data(), bt.data(), k, p);
                         kern.gemm(g.data(), bt.data(), da, rows, p, k);
                       }
                       if (float* db = grad_ptr(b)) {
                         std::vector<float> at(rows * k);
                         transpose_2d(a.data().data(), at.data(), rows, k);
                         kern.gemm(at.data(), g.data(), db, k, rows, p);
                       }
                     });
}

Tensor add(const Tensor& a, const Tensor& b) {
  const std::size_t reps = broadcast_repeats(a.shape(), b.shape(), "add");
  const std::size_t nb = b.numel();
  std::vector<float> out(a.data().begin(), a.data().end());
  auto bv = b.data();
  for (std::size_t r = 0; r < reps; ++r) {
    for (std::size_t i = 0; i < nb; ++i) out[r * nb + i] += bv[i];
  }
  return make_result(a.shape(), std::move(out), {a, b},
                     [a, b, reps, nb](std::span<const float> g) {
                       if (float* da = grad_ptr(a)) {
                         for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
                       }
                       if (float* db = grad_ptr(b)) {
                         for (std::size_t r = 0; r < reps; ++r) {
                           for (std::size_t i = 0; i < nb; ++i) {
                             db[i] += g[r * nb + i];
                           }
                         }
                       }
                     });
}

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, neg(b)); }

Tensor mul(const Tensor& a, const Tensor& b) {
  const std::size_t reps = broadcast_repeats(a.shape(), b.shape(), "mul");
  const std::size_t nb = b.numel();
  std::vector<float> out(a.numel());
  auto av = a.data();
  auto bv = b.data();
  for (std::size_t r = 0; r < reps; ++r) {
    for (std::size_t i = 0; i < nb; ++i) {
      out[r * nb + i] = av[r * nb + i] * bv[i];
    }
  }
  return make_result(a.shape(), std::move(out), {a, b},
                     [a, b, reps, nb](std::span<const float> g) {
                       auto av = a.data();
                       auto bv = b.data();
                       if (float* da = grad_ptr(a)) {
                         for (std::size_t r = 0; r < reps; ++r) {
                           for (std::size_t i = 0; i < nb; ++i) {
                             da[r * nb + i] += g[r * nb + i] * bv[i];
                           }
                         }
                       }
                       if (float* db = grad_ptr(b)) {
                         for (std::size_t r = 0; r < reps; ++r) {
                           for (std::size_t i = 0; i < nb; ++i) {
                             db[i] += g[r * nb + i] * av[r * nb + i];
                           }
                         }
                       }
                     });
}

Tensor scale(const Tensor& x, float factor) {
  return unary(
      x,
      [factor](const float* in, float* out, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) out[i] = in[i] * factor;
      },
      [factor](float, float) { return factor; });
}

Tensor neg(const Tensor& x) { return scale(x, -1.0f); }

Tensor exp(const Tensor& x) {
  return unary(
      x, [](const float* in, float* out, std::size_t n) {
        simd::kernels().exp(in, out, n);
      },
      [](float, float y) { return y; });
}

Tensor silu(const Tensor& x) {
  return unary(
      x, [](const float* in, float* out, std::size_t n) {
        simd::kernels().silu(in, out, n);
      },
      [](float v, float) {
        const float s = sigmoid(v);
        return s * (1.0f + v * (1.0f - s));
      });
}

Tensor gelu(const Tensor& x) {
  constexpr float kC = 0.7978845608028654f;  // sqrt(2/pi)
  constexpr float kA = 0.044715f;
  return unary(
      x,
      [](const float* in, float* out, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
          const float v = in[i];
          out[i] = 0.5f * v * (1.0f + std::tanh(kC * (v + kA * v * v * v)));
        }
      },
      [](float v, float) {
        const float th = std::tanh(kC * (v + kA * v * v * v));
        return 0.5f * (1.0f + th) +
               0.5f * v * (1.0f - th * th) * kC * (1.0f + 3.0f * kA * v * v);
      });
}

Tensor softplus(const Tensor& x) {
  return unary(
      x, [](const float* in, float* out, std::size_t n) {
        simd::kernels().softplus(in, out, n);
      },
      [](float v, float) { return v > 20.0f ? 1.0f : sigmoid(v); });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (float v : x.data()) acc += v;
  return make_result(Shape{}, {static_cast<float>(acc)}, {x},
                     [x](std::span<const float> g) {
                       if (float* dx = grad_ptr(x)) {
                         for (std::size_t i = 0; i < x.numel(); ++i) dx[i] += g[0];
                       }
                     });
}

Tensor mean(const Tensor& x) {
  return scale(sum(x), 1.0f / static_cast<float>(std::max<std::size_t>(x.numel(), 1)));
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) +
                         " as " + shape_str(shape));
  }
  std::vector<float> out(x.data().begin(), x.data().end());
  return make_result(std::move(shape), std::move(out), {x},
                     [x](std::span<const float> g) {
                       if (float* dx = grad_ptr(x)) {
                         for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
                       }
                     });
}

Tensor slice(const Tensor& x, int axis, std::size_t start, std::size_t length) {
  const std::size_t ax = normalize_axis(axis, x.dim());
  const Shape& in = x.shape();
  if (start + length > in[ax]) {
    throw DimensionError("slice [" + std::to_string(start) + ", " +
                         std::to_string(start + length) + ") exceeds axis " +
                         std::to_string(ax) + " of " + shape_str(in));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < ax; ++i) outer *= in[i];
  for (std::size_t i = ax + 1; i < in.size(); ++i) inner *= in[i];
  const std::size_t span_in = in[ax] * inner, span_out = length * inner;
  Shape shape = in;
  shape[ax] = length;
  std::vector<float> out(outer * span_out);
  auto xv = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(xv.begin() + o * span_in + start * inner, span_out,
                out.begin() + o * span_out);
  }
  return make_result(std::move(shape), std::move(out), {x},
                     [=](std::span<const float> g) {
                       float* dx = grad_ptr(x);
                       if (!dx) return;
                       for (std::size_t o = 0; o < outer; ++o) {
                         float* dst = dx + o * span_in + start * inner;
                         const float* src = g.data() + o * span_out;
                         for (std::size_t i = 0; i < span_out; ++i) dst[i] += src[i];
                       }
                     });
}

Tensor concat(std::span<const Tensor> parts, int axis) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  const Shape& first = parts[0].shape();
  const std::size_t ax = normalize_axis(axis, first.size());
  Shape shape = first;
  shape[ax] = 0;
  for (const Tensor& t : parts) {
    const Shape& s = t.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) {
      if (i != ax && s[i] != first[i]) ok = false;
    }
    if (!ok) {
      throw DimensionError("concat: " + shape_str(s) + " incompatible with " +
                           shape_str(first) + " on axis " + std::to_string(ax));
    }
    shape[ax] += s[ax];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < ax; ++i) outer *= first[i];
  for (std::size_t i = ax + 1; i < first.size(); ++i) inner *= first[i];
  const std::size_t row = shape[ax] * inner;
  std::vector<float> out(outer * row);
  std::size_t offset = 0;
  std::vector<std::size_t> offsets;
  for (const Tensor& t : parts) {
    const std::size_t chunk = t.size(static_cast<int>(ax)) * inner;
    auto tv = t.data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(tv.begin() + o * chunk, chunk, out.begin() + o * row + offset);
    }
    offsets.push_back(offset);
    offset += chunk;
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return make_result(std::move(shape), std::move(out), inputs,
                     [inputs, offsets, outer, inner, row, ax](std::span<const float> g) {
                       for (std::size_t k = 0; k < inputs.size(); ++k) {
                         float* dx = grad_ptr(inputs[k]);
                         if (!dx) continue;
                         const std::size_t chunk =
                             inputs[k].size(static_cast<int>(ax)) * inner;
                         for (std::size_t o = 0; o < outer; ++o) {
                           const float* src = g.data() + o * row + offsets[k];
                           float* dst = dx + o * chunk;
                           for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
                         }
                       }
                     });
}

Tensor reverse_seq(const Tensor& x, int axis) {
  const std::size_t ax = normalize_axis(axis, x.dim());
  const Shape& in = x.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < ax; ++i) outer *= in[i];
  for (std::size_t i = ax + 1; i < in.size(); ++i) inner *= in[i];
  const std::size_t len = in[ax];
  auto flip = [outer, inner, len](const float* src, float* dst, bool accumulate) {
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t t = 0; t < len; ++t) {
        const float* s = src + (o * len + t) * inner;
        float* d = dst + (o * len + (len - 1 - t)) * inner;
        if (accumulate) {
          for (std::size_t i = 0; i < inner; ++i) d[i] += s[i];
        } else {
          std::copy_n(s, inner, d);
        }
      }
    }
  };
  std::vector<float> out(x.numel());
  flip(x.data().data(), out.data(), false);
  return make_result(in, std::move(out), {x}, [x, flip](std::span<const float> g) {
    if (float* dx = grad_ptr(x)) flip(g.data(), dx, true);
  });
}

Tensor gather(const Tensor& x, std::vector<std::size_t> index, Shape shape) {
  if (shape_numel(shape) != index.size()) {
    throw DimensionError("gather: " + std::to_string(index.size()) +
                         " indices for shape " + shape_str(shape));
  }
  const std::size_t n = x.numel();
  auto xv = x.data();
  std::vector<float> out(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= n) {
      throw DimensionError("gather: index " + std::to_string(index[i]) +
                           " out of range for " + shape_str(x.shape()));
    }
    out[i] = xv[index[i]];
  }
  auto idx = std::make_shared<const std::vector<std::size_t>>(std::move(index));
  return make_result(std::move(shape), std::move(out), {x},
                     [x, idx](std::span<const float> g) {
                       if (float* dx = grad_ptr(x)) {
                         for (std::size_t i = 0; i < g.size(); ++i) {
                           dx[(*idx)[i]] += g[i];
                         }
                       }
                     });
}

Tensor transpose(const Tensor& x, int axis0, int axis1) {
  const Shape& in = x.shape();
  const std::size_t a0 = normalize_axis(axis0, in.size());
  const std::size_t a1 = normalize_axis(axis1, in.size());
  Shape shape = in;
  std::swap(shape[a0], shape[a1]);
  std::vector<std::size_t> in_strides(in.size(), 1);
  for (std::size_t i = in.size(); i-- > 1;) {
    in_strides[i - 1] = in_strides[i] * in[i];
  }
  std::vector<std::size_t> strides = in_strides;
  std::swap(strides[a0], strides[a1]);
  std::vector<std::size_t> index(x.numel());
  std::vector<std::size_t> coord(shape.size(), 0);
  for (std::size_t flat = 0; flat < index.size(); ++flat) {
    std::size_t src = 0;
    for (std::size_t d = 0; d < shape.size(); ++d) src += coord[d] * strides[d];
    index[flat] = src;
    for (std::size_t d = shape.size(); d-- > 0;) {
      if (++coord[d] < shape[d]) break;
      coord[d] = 0;
    }
  }
  return gather(x, std::move(index), std::move(shape));
}

Tensor repeat_leading(const Tensor& x, std::size_t count) {
  Shape shape = x.shape();
  shape.insert(shape.begin(), count);
  const std::size_t n = x.numel();
  std::vector<float> out(count * n);
  for (std::size_t r = 0; r < count; ++r) {
    std::copy(x.data().begin(), x.data().end(), out.begin() + r * n);
  }
  return make_result(std::move(shape), std::move(out), {x},
                     [x, count, n](std::span<const float> g) {
                       if (float* dx = grad_ptr(x)) {
                         for (std::size_t r = 0; r < count; ++r) {
                           for (std::size_t i = 0; i < n; ++i) dx[i] += g[r * n + i];
                         }
                       }
                     });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  float eps) {
  if (!(eps > 0.0f)) throw ConfigError("layer_norm: eps must be positive");
  const std::size_t width = x.size(-1);
  if (gain.shape() != Shape{width} || bias.shape() != Shape{width}) {
    throw DimensionError("layer_norm: gain/bias " + shape_str(gain.shape()) +
                         "/" + shape_str(bias.shape()) + " do not match " +
                         shape_str(x.shape()));
  }
  const std::size_t rows = x.numel() / width;
  auto xv = x.data();
  auto gv = gain.data();
  auto bv = bias.data();
  auto normed = std::make_shared<std::vector<float>>(x.numel());
  auto rstd = std::make_shared<std::vector<float>>(rows);
  std::vector<float> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const float* row = xv.data() + r * width;
    double mu = 0.0;
    for (std::size_t i = 0; i < width; ++i) mu += row[i];
    mu /= static_cast<double>(width);
    double var = 0.0;
    for (std::size_t i = 0; i < width; ++i) {
      const double d = row[i] - mu;
      var += d * d;
    }
    var /= static_cast<double>(width);
    const double inv = 1.0 / std::sqrt(var + eps);
    (*rstd)[r] = static_cast<float>(inv);
    for (std::size_t i = 0; i < width; ++i) {
      const float xhat = static_cast<float>((row[i] - mu) * inv);
      (*normed)[r * width + i] = xhat;
      out[r * width + i] = xhat * gv[i] + bv[i];
    }
  }
  return make_result(
      x.shape(), std::move(out), {x, gain, bias},
      [x, gain, bias, normed, rstd, rows, width](std::span<const float> g) {
        auto gv = gain.data();
        float* dx = grad_ptr(x);
        float* dg = grad_ptr(gain);
        float* db = grad_ptr(bias);
        for (std::size_t r = 0; r < rows; ++r) {
          const float* gr = g.data() + r * width;
          const float* xh = normed->data() + r * width;
          double sum_d = 0.0, sum_dx = 0.0;
          for (std::size_t i = 0; i < width; ++i) {
            const double d = static_cast<double>(gr[i]) * gv[i];
            sum_d += d;
            sum_dx += d * xh[i];
            if (dg) dg[i] += gr[i] * xh[i];
            if (db) db[i] += gr[i];
          }
          if (!dx) continue;
          const double mean_d = sum_d / static_cast<double>(width);
          const double mean_dx = sum_dx / static_cast<double>(width);
          const double inv = (*rstd)[r];
          for (std::size_t i = 0; i < width; ++i) {
            const double d = static_cast<double>(gr[i]) * gv[i];
            dx[r * width + i] +=
                static_cast<float>(inv * (d - mean_d - xh[i] * mean_dx));
          }
        }
      });
}

namespace {

// Shared causal depthwise convolution. Element (b, t, e) of x lives at
// b * batch_stride + t * time_stride + e * chan_stride.
struct ConvLayout {
  std::size_t batch, length, channels;
  std::size_t batch_stride, time_stride, chan_stride;
  std::size_t at(std::size_t b, std::size_t t, std::size_t e) const {
    return b * batch_stride + t * time_stride + e * chan_stride;
  }
};

Tensor causal_conv_impl(const Tensor& x, const Tensor& kernel,
                        const Tensor& bias, ConvLayout lay) {
  if (kernel.dim() != 2 || kernel.size(0) != lay.channels) {
    throw DimensionError("conv1d: kernel " + shape_str(kernel.shape()) +
                         " does not match " + shape_str(x.shape()));
  }
  if (bias.shape() != Shape{lay.channels}) {
    throw DimensionError("conv1d: bias " + shape_str(bias.shape()) +
                         " does not match " + shape_str(x.shape()));
  }
  const std::size_t K = kernel.size(1);
  if (K == 0) throw ConfigError("conv1d: kernel width must be positive");
  const std::size_t E = lay.channels;
  auto xv = x.data();
  auto kv = kernel.data();
  auto bv = bias.data();
  std::vector<float> out(x.numel());
  for (std::size_t b = 0; b < lay.batch; ++b) {
    for (std::size_t t = 0; t < lay.length; ++t) {
      for (std::size_t e = 0; e < E; ++e) out[lay.at(b, t, e)] = bv[e];
      for (std::size_t j = 0; j < K; ++j) {
        // Tap j reads position t - (K - 1) + j.
        if (t + j + 1 < K) continue;
        const std::size_t src = t + j + 1 - K;
        for (std::size_t e = 0; e < E; ++e) {
          out[lay.at(b, t, e)] += kv[e * K + j] * xv[lay.at(b, src, e)];
        }
      }
    }
  }
  return make_result(x.shape(), std::move(out), {x, kernel, bias},
                     [x, kernel, bias, lay, K](std::span<const float> g) {
                       const std::size_t E = lay.channels;
                       auto xv = x.data();
                       auto kv = kernel.data();
                       float* dx = grad_ptr(x);
                       float* dk = grad_ptr(kernel);
                       float* db = grad_ptr(bias);
                       for (std::size_t b = 0; b < lay.batch; ++b) {
                         for (std::size_t t = 0; t < lay.length; ++t) {
                           if (db) {
                             for (std::size_t e = 0; e < E; ++e) db[e] += g[lay.at(b, t, e)];
                           }
                           for (std::size_t j = 0; j < K; ++j) {
                             if (t + j + 1 < K) continue;
                             const std::size_t src = t + j + 1 - K;
                             for (std::size_t e = 0; e < E; ++e) {
                               const float go = g[lay.at(b, t, e)];
                               if (dx) dx[lay.at(b, src, e)] += kv[e * K + j] * go;
                               if (dk) dk[e * K + j] += xv[lay.at(b, src, e)] * go;
                             }
                           }
                         }
                       }
                     });
}

}  // namespace

Tensor conv1d_depthwise(const Tensor& x, const Tensor& kernel,
                        const Tensor& bias) {
  if (x.dim() != 3) {
    throw DimensionError("conv1d_depthwise expects [B,E,L], got " +
                         shape_str(x.shape()));
  }
  const std::size_t B = x.size(0), E = x.size(1), L = x.size(2);
  return causal_conv_impl(x, kernel, bias, ConvLayout{B, L, E, E * L, 1, L});
}

Tensor causal_conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
  if (x.dim() != 3) {
    throw DimensionError("causal_conv1d expects [B,L,E], got " +
                         shape_str(x.shape()));
  }
  const std::size_t B = x.size(0), L = x.size(1), E = x.size(2);
  return causal_conv_impl(x, kernel, bias, ConvLayout{B, L, E, L * E, E, 1});
}

Tensor cross_entropy_label_smoothed(const Tensor& logits,
                                    std::span<const int> targets,
                                    float smoothing) {
  if (logits.dim() != 2 || logits.size(0) != targets.size()) {
    throw DimensionError("cross_entropy: logits " + shape_str(logits.shape()) +
                         " vs " + std::to_string(targets.size()) + " targets");
  }
  const std::size_t B = logits.size(0), C = logits.size(1);
  for (int t : targets) {
    if (t < 0 || static_cast<std::size_t>(t) >= C) {
      throw DataError("cross_entropy: target " + std::to_string(t) +
                      " outside [0, " + std::to_string(C) + ")");
    }
  }
  auto lv = logits.data();
  auto probs = std::make_shared<std::vector<float>>(B * C);
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    const float* row = lv.data() + b * C;
    const float mx = *std::max_element(row, row + C);
    double z = 0.0;
    for (std::size_t c = 0; c < C; ++c) z += std::exp(static_cast<double>(row[c] - mx));
    const double log_z = std::log(z) + mx;
    double mean_nll = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      mean_nll += log_z - row[c];
      (*probs)[b * C + c] = static_cast<float>(std::exp(row[c] - log_z));
    }
    mean_nll /= static_cast<double>(C);
    const double target_nll = log_z - row[targets[b]];
    total += (1.0 - smoothing) * target_nll + smoothing * mean_nll;
  }
  std::vector<int> tgt(targets.begin(), targets.end());
  return make_result(
      Shape{}, {static_cast<float>(total / static_cast<double>(B))}, {logits},
      [logits, probs, tgt, B, C, smoothing](std::span<const float> g) {
        float* dl = grad_ptr(logits);
        if (!dl) return;
        const float scale_b = g[0] / static_cast<float>(B);
        const float off = smoothing / static_cast<float>(C);
        for (std::size_t b = 0; b < B; ++b) {
          for (std::size_t c = 0; c < C; ++c) {
            float q = off;
            if (static_cast<int>(c) == tgt[b]) q += 1.0f - smoothing;
            dl[b * C + c] += scale_b * ((*probs)[b * C + c] - q);
          }
        }
      });
}

}  // namespace kwm
