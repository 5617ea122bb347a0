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

#include "kwm/augment.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kwm/error.hpp"

namespace kwm {

void AugmentConfig::validate() const {
  if (shift_ms_min > shift_ms_max || !(resample_min > 0.0) ||
      resample_min > resample_max || noise_volume < 0.0 || noise_prob < 0.0 ||
      noise_prob > 1.0 || clip_samples == 0) {
    throw ConfigError("augment: invalid configuration");
  }
}

std::vector<float> resample_linear(const std::vector<float>& x, double rate) {
  if (!(rate > 0.0)) throw ConfigError("resample: rate must be positive");
  if (x.empty()) return {};
  const auto n = static_cast<std::size_t>(std::llround(x.size() / rate));
  std::vector<float> y(n, 0.0f);
  for (std::size_t j = 0; j < n; ++j) {
    const double pos = static_cast<double>(j) * rate;
    const auto i = static_cast<std::size_t>(pos);
    if (i + 1 < x.size()) {
      const double frac = pos - static_cast<double>(i);
      y[j] = static_cast<float>(x[i] + frac * (static_cast<double>(x[i + 1]) - x[i]));
    } else if (i < x.size()) {
      y[j] = x[i];
    }
  }
  return y;
}

WaveDraw draw_waveform_augment(const AugmentConfig& cfg, int sample_rate,
                               const std::vector<Waveform>& noise_pool, Rng& rng) {
  cfg.validate();
  if (noise_pool.empty() && cfg.noise_prob > 0.0) {
    throw ConfigError("augment: noise_prob > 0 but the noise pool is empty");
  }
  WaveDraw d;
  const double shift_ms = rng.uniform(cfg.shift_ms_min, cfg.shift_ms_max);
  d.shift_samples = std::lround(shift_ms * sample_rate / 1000.0);
  d.rate = rng.uniform(cfg.resample_min, cfg.resample_max);
  d.add_noise = cfg.noise_prob > 0.0 && rng.bernoulli(cfg.noise_prob);
  if (d.add_noise) {
    d.noise_index = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(noise_pool.size()) - 1));
    const std::size_t len = noise_pool[d.noise_index].samples.size();
    if (len < cfg.clip_samples) {
      throw DataError("augment: noise clip " + std::to_string(d.noise_index) +
                      " is shorter than one clip");
    }
    d.noise_offset = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(len - cfg.clip_samples)));
  }
  return d;
}

Waveform apply_waveform_augment(const Waveform& w, const WaveDraw& draw,
                                const std::vector<Waveform>& noise_pool,
                                const AugmentConfig& cfg) {
  const auto n = static_cast<long>(w.samples.size());
  std::vector<float> shifted(w.samples.size(), 0.0f);
  for (long i = 0; i < n; ++i) {
    const long src = i - draw.shift_samples;
    if (src >= 0 && src < n) shifted[static_cast<std::size_t>(i)] = w.samples[static_cast<std::size_t>(src)];
  }

  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples = draw.rate == 1.0 ? std::move(shifted) : resample_linear(shifted, draw.rate);
  out.samples.resize(cfg.clip_samples, 0.0f);

  if (draw.add_noise) {
    if (draw.noise_index >= noise_pool.size()) {
      throw ConfigError("augment: noise index out of range");
    }
    const auto& noise = noise_pool[draw.noise_index].samples;
    if (draw.noise_offset + cfg.clip_samples > noise.size()) {
      throw DataError("augment: noise crop exceeds the clip");
    }
    for (std::size_t i = 0; i < cfg.clip_samples; ++i) {
      out.samples[i] += static_cast<float>(cfg.noise_volume) * noise[draw.noise_offset + i];
    }
  }
  for (float& s : out.samples) s = std::clamp(s, -1.0f, 1.0f);
  return out;
}

Waveform augment_waveform(const Waveform& w, const std::vector<Waveform>& noise_pool,
                          const AugmentConfig& cfg, Rng& rng) {
  const WaveDraw draw = draw_waveform_augment(cfg, w.sample_rate, noise_pool, rng);
  return apply_waveform_augment(w, draw, noise_pool, cfg);
}

MaskDraw draw_masks(const AugmentConfig& cfg, std::size_t rows, std::size_t cols,
                    Rng& rng) {
  auto draw = [&rng](std::size_t max_width, std::size_t extent) {
    const std::size_t width = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(std::min(max_width, extent))));
    const std::size_t start = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(extent - width)));
    return Mask{start, width};
  };
  MaskDraw d;
  for (std::size_t i = 0; i < cfg.n_time_masks; ++i) d.time.push_back(draw(cfg.time_mask_max, cols));
  for (std::size_t i = 0; i < cfg.n_freq_masks; ++i) d.freq.push_back(draw(cfg.freq_mask_max, rows));
  return d;
}

MfccMatrix apply_masks(const MfccMatrix& m, const MaskDraw& draw) {
  const std::size_t rows = m.coeffs.size(0), cols = m.coeffs.size(1);
  auto src = m.coeffs.data();
  std::vector<float> v(src.begin(), src.end());
  for (const Mask& t : draw.time) {
    for (std::size_t c = t.start; c < std::min(cols, t.start + t.width); ++c) {
      for (std::size_t r = 0; r < rows; ++r) v[r * cols + c] = 0.0f;
    }
  }
  for (const Mask& f : draw.freq) {
    for (std::size_t r = f.start; r < std::min(rows, f.start + f.width); ++r) {
      std::fill_n(v.begin() + static_cast<std::ptrdiff_t>(r * cols), cols, 0.0f);
    }
  }
  return MfccMatrix{Tensor({rows, cols}, std::move(v)), m.source_frames};
}

MfccMatrix spec_augment(const MfccMatrix& m, const AugmentConfig& cfg, Rng& rng) {
  return apply_masks(m, draw_masks(cfg, m.coeffs.size(0), m.coeffs.size(1), rng));
}

}  // namespace kwm
