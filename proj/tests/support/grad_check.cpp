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

#include "grad_check.hpp"

#include <cmath>

#include "kwm/bimamba.hpp"
#include "kwm/model.hpp"
#include "kwm/ops.hpp"
#include "kwm/ssm_scan.hpp"

namespace kwm::testing {

namespace {

double contract(const Tensor& out, const std::vector<float>& weights) {
  auto v = out.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) acc += static_cast<double>(v[i]) * weights[i];
  return acc;
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return static_cast<std::size_t>(
      rng.uniform_int(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
}

void randomize(const Tensor& t, Rng& rng, double lo, double hi) {
  Tensor h = t;
  for (float& x : h.mutable_data()) x = static_cast<float>(rng.uniform(lo, hi));
}

std::vector<Tensor> leaves(const ParameterList& params) {
  std::vector<Tensor> out;
  for (const auto& p : params) out.push_back(p.tensor);
  return out;
}

}  // namespace

Tensor random_tensor(Shape shape, Rng& rng, double lo, double hi, bool requires_grad) {
  std::vector<float> v(shape_numel(shape));
  for (float& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

double gradient_error(const OutputFn& f, const std::vector<Tensor>& inputs, Rng& rng,
                      double step) {
  for (const Tensor& t : inputs) {
    Tensor h = t;
    h.zero_grad();
  }
  const Tensor out = f(inputs);
  std::vector<float> weights(out.numel());
  for (float& w : weights) w = static_cast<float>(rng.uniform(-1.0, 1.0));
  backward(sum(mul(out, Tensor(out.shape(), weights))));

  double diff2 = 0.0, analytic2 = 0.0, numeric2 = 0.0;
  NoGradGuard no_grad;
  for (const Tensor& input : inputs) {
    if (!input.requires_grad()) continue;
    Tensor t = input;
    const std::vector<float> analytic(t.grad().begin(), t.grad().end());
    auto values = t.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const float x = values[i];
      auto central = [&](double h) {
        const float up = static_cast<float>(x + h), down = static_cast<float>(x - h);
        values[i] = up;
        const double f_up = contract(f(inputs), weights);
        values[i] = down;
        const double f_down = contract(f(inputs), weights);
        values[i] = x;
        return (f_up - f_down) / (static_cast<double>(up) - down);
      };
      // Richardson extrapolation cancels the O(h^2) term of the central
      // difference.
      const double numeric = (4.0 * central(0.5 * step) - central(step)) / 3.0;
      const double a = analytic.empty() ? 0.0 : analytic[i];
      diff2 += (a - numeric) * (a - numeric);
      analytic2 += a * a;
      numeric2 += numeric * numeric;
    }
  }
  const double scale = std::sqrt(std::max(analytic2, numeric2));
  return scale == 0.0 ? 0.0 : std::sqrt(diff2) / scale;
}

std::vector<GradCase> gradient_cases() {
  std::vector<GradCase> cases;
  auto add_case = [&cases](std::string name, std::function<double(Rng&)> body) {
    cases.push_back({std::move(name), [body](std::uint64_t seed) {
                       Rng rng(seed);
                       return body(rng);
                     }});
  };

  add_case("matmul", [](Rng& rng) {
    const std::size_t b = pick(rng, 1, 3), m = pick(rng, 1, 5), k = pick(rng, 1, 6), p = pick(rng, 1, 5);
    Shape as = rng.bernoulli(0.5) ? Shape{b, m, k} : Shape{m, k};
    return gradient_error([](auto& in) { return matmul(in[0], in[1]); },
                          {random_tensor(as, rng), random_tensor({k, p}, rng)}, rng);
  });
  add_case("add", [](Rng& rng) {
    const std::size_t a = pick(rng, 1, 4), b = pick(rng, 1, 5);
    Shape second = rng.bernoulli(0.5) ? Shape{a, b} : Shape{b};
    return gradient_error([](auto& in) { return add(in[0], in[1]); },
                          {random_tensor({a, b}, rng), random_tensor(second, rng)}, rng);
  });
  add_case("sub", [](Rng& rng) {
    const std::size_t a = pick(rng, 1, 4), b = pick(rng, 1, 5);
    Shape second = rng.bernoulli(0.5) ? Shape{a, b} : Shape{b};
    return gradient_error([](auto& in) { return sub(in[0], in[1]); },
                          {random_tensor({a, b}, rng), random_tensor(second, rng)}, rng);
  });
  add_case("mul", [](Rng& rng) {
    const std::size_t a = pick(rng, 1, 3), b = pick(rng, 1, 4), c = pick(rng, 1, 4);
    Shape second = rng.bernoulli(0.5) ? Shape{a, b, c} : Shape{b, c};
    return gradient_error([](auto& in) { return mul(in[0], in[1]); },
                          {random_tensor({a, b, c}, rng), random_tensor(second, rng)}, rng);
  });
  add_case("scale", [](Rng& rng) {
    const float s = static_cast<float>(rng.uniform(-2.0, 2.0));
    return gradient_error([s](auto& in) { return scale(in[0], s); },
                          {random_tensor({pick(rng, 1, 6), 3}, rng)}, rng);
  });
  add_case("neg", [](Rng& rng) {
    return gradient_error([](auto& in) { return neg(in[0]); },
                          {random_tensor({pick(rng, 1, 8)}, rng)}, rng);
  });
  add_case("exp", [](Rng& rng) {
    return gradient_error([](auto& in) { return kwm::exp(in[0]); },
                          {random_tensor({pick(rng, 1, 4), pick(rng, 1, 4)}, rng, -2, 2)}, rng);
  });
  add_case("silu", [](Rng& rng) {
    return gradient_error([](auto& in) { return silu(in[0]); },
                          {random_tensor({pick(rng, 1, 20)}, rng, -4, 4)}, rng);
  });
  add_case("gelu", [](Rng& rng) {
    return gradient_error([](auto& in) { return gelu(in[0]); },
                          {random_tensor({pick(rng, 1, 20)}, rng, -4, 4)}, rng);
  });
  add_case("softplus", [](Rng& rng) {
    return gradient_error([](auto& in) { return softplus(in[0]); },
                          {random_tensor({pick(rng, 1, 20)}, rng, -6, 6)}, rng);
  });
  add_case("sum", [](Rng& rng) {
    return gradient_error([](auto& in) { return sum(in[0]); },
                          {random_tensor({pick(rng, 1, 5), pick(rng, 1, 5)}, rng)}, rng);
  });
  add_case("mean", [](Rng& rng) {
    return gradient_error([](auto& in) { return mean(in[0]); },
                          {random_tensor({pick(rng, 1, 5), pick(rng, 1, 5)}, rng)}, rng);
  });
  add_case("reshape", [](Rng& rng) {
    const std::size_t a = pick(rng, 1, 4), b = pick(rng, 1, 4);
    return gradient_error([a, b](auto& in) { return mul(reshape(in[0], {b, a}), in[1]); },
                          {random_tensor({a, b}, rng), random_tensor({b, a}, rng)}, rng);
  });
  add_case("slice", [](Rng& rng) {
    const std::size_t a = pick(rng, 2, 5), b = pick(rng, 2, 6);
    const int axis = rng.bernoulli(0.5) ? 0 : 1;
    const std::size_t extent = axis == 0 ? a : b;
    const std::size_t start = pick(rng, 0, extent - 1), len = pick(rng, 1, extent - start);
    return gradient_error([=](auto& in) { return silu(slice(in[0], axis, start, len)); },
                          {random_tensor({a, b}, rng)}, rng);
  });
  add_case("concat", [](Rng& rng) {
    const std::size_t a = pick(rng, 1, 3), b = pick(rng, 1, 3), c = pick(rng, 1, 4);
    return gradient_error(
        [](auto& in) {
          const Tensor parts[] = {in[0], in[1]};
          return silu(concat(parts, 1));
        },
        {random_tensor({a, b, c}, rng), random_tensor({a, pick(rng, 1, 3), c}, rng)}, rng);
  });
  add_case("reverse_seq", [](Rng& rng) {
    const Tensor w = random_tensor({3}, rng, -1, 1, false);
    return gradient_error([w](auto& in) { return mul(reverse_seq(in[0], 1), w); },
                          {random_tensor({pick(rng, 1, 3), pick(rng, 1, 6), 3}, rng)}, rng);
  });
  add_case("transpose", [](Rng& rng) {
    return gradient_error([](auto& in) { return silu(transpose(in[0], 0, 2)); },
                          {random_tensor({pick(rng, 1, 3), pick(rng, 1, 4), pick(rng, 1, 4)}, rng)},
                          rng);
  });
  add_case("gather", [](Rng& rng) {
    const std::size_t n = pick(rng, 1, 8), m = pick(rng, 1, 12);
    std::vector<std::size_t> idx(m);
    for (auto& i : idx) i = pick(rng, 0, n - 1);
    return gradient_error([idx, m](auto& in) { return silu(gather(in[0], idx, {m})); },
                          {random_tensor({n}, rng)}, rng);
  });
  add_case("repeat_leading", [](Rng& rng) {
    const std::size_t r = pick(rng, 1, 4);
    return gradient_error([r](auto& in) { return silu(repeat_leading(in[0], r)); },
                          {random_tensor({pick(rng, 1, 3), 2}, rng)}, rng);
  });
  add_case("layer_norm", [](Rng& rng) {
    const std::size_t d = pick(rng, 2, 8);
    return gradient_error([](auto& in) { return layer_norm(in[0], in[1], in[2]); },
                          {random_tensor({pick(rng, 1, 3), pick(rng, 1, 4), d}, rng, -2, 2),
                           random_tensor({d}, rng, 0.5, 1.5), random_tensor({d}, rng)},
                          rng);
  });
  add_case("conv1d_depthwise", [](Rng& rng) {
    const std::size_t e = pick(rng, 1, 4), k = pick(rng, 1, 4);
    return gradient_error([](auto& in) { return conv1d_depthwise(in[0], in[1], in[2]); },
                          {random_tensor({pick(rng, 1, 2), e, pick(rng, 1, 7)}, rng),
                           random_tensor({e, k}, rng), random_tensor({e}, rng)},
                          rng);
  });
  add_case("causal_conv1d", [](Rng& rng) {
    const std::size_t e = pick(rng, 1, 4), k = pick(rng, 1, 4);
    return gradient_error([](auto& in) { return causal_conv1d(in[0], in[1], in[2]); },
                          {random_tensor({pick(rng, 1, 2), pick(rng, 1, 7), e}, rng),
                           random_tensor({e, k}, rng), random_tensor({e}, rng)},
                          rng);
  });
  add_case("cross_entropy", [](Rng& rng) {
    const std::size_t b = pick(rng, 1, 5), c = pick(rng, 2, 6);
    std::vector<int> targets(b);
    for (int& t : targets) t = static_cast<int>(pick(rng, 0, c - 1));
    const float smoothing = rng.bernoulli(0.5) ? 0.1f : 0.0f;
    return gradient_error(
        [targets, smoothing](auto& in) {
          return cross_entropy_label_smoothed(in[0], targets, smoothing);
        },
        {random_tensor({b, c}, rng, -3, 3)}, rng);
  });
  auto scan_case = [](Rng& rng, bool with_d) {
    const std::size_t b = pick(rng, 1, 2), l = pick(rng, 1, 6), e = pick(rng, 1, 4),
                      n = pick(rng, 1, 9);
    std::vector<Tensor> in = {random_tensor({b, l, e}, rng, 0.1, 1.0),   // delta
                              random_tensor({b, l, n}, rng),             // B
                              random_tensor({b, l, n}, rng),             // C
                              random_tensor({b, l, e}, rng),             // x
                              random_tensor({e, n}, rng, -2.0, -0.2)};   // A
    if (with_d) in.push_back(random_tensor({e}, rng));
    return gradient_error(
        [with_d](auto& t) {
          ssm::SelectiveInputs s{t[0], t[1], t[2], t[3], with_d ? t[5] : Tensor()};
          return ssm::selective_scan_seq(s, t[4]);
        },
        in, rng);
  };
  add_case("selective_scan", [scan_case](Rng& rng) { return scan_case(rng, false); });
  add_case("selective_scan_d_skip", [scan_case](Rng& rng) { return scan_case(rng, true); });

  for (Directionality mode : {Directionality::kBiBi, Directionality::kFoBi, Directionality::kFoFo}) {
    add_case("bimamba_" + std::string(to_string(mode)), [mode](Rng& rng) {
      BlockConfig cfg;
      cfg.dim = 4;
      cfg.state = 4;
      cfg.conv_width = 3;
      cfg.mode = mode;
      cfg.fo_bi_shared_conv = rng.bernoulli(0.5);
      BiMambaBlock block = make_block(cfg, rng.next());
      // The default output projection is near zero; widen it so every
      // parameter has a visible effect on the output.
      randomize(block.w_out, rng, -0.5, 0.5);
      auto params = leaves(block.parameters(""));
      params.insert(params.begin(), random_tensor({pick(rng, 1, 2), pick(rng, 2, 5), 4}, rng));
      return gradient_error([&block](auto& in) { return bimamba_forward(block, in[0]); }, params,
                            rng);
    });
  }

  add_case("classifier_kwm_t", [](Rng& rng) {
    ModelConfig mc;
    mc.dim = 4;
    mc.layers = 1;
    mc.variant = Variant::kKwmT;
    mc.num_classes = 3;
    mc.n_mels = 4;
    mc.frames = 4;
    mc.patch_f = 2;
    mc.patch_t = 2;
    mc.state = 2;
    mc.conv_width = 2;
    mc.seed = rng.next();
    KwmModel model(mc);
    for (const auto& p : model.parameters()) randomize(p.tensor, rng, -0.5, 0.5);
    auto params = leaves(model.parameters());
    params.insert(params.begin(), random_tensor({2, 4, 4}, rng));
    return gradient_error([&model](auto& in) { return model.classify(in[0]); }, params, rng);
  });
  return cases;
}

}  // namespace kwm::testing
