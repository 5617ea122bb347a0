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

// Training-time augmentation: waveform shift/resample/noise, then time and
// frequency masks on the MFCC matrix. Each random choice is drawn into an
// explicit struct first so tests can force particular draws.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "kwm/features.hpp"
#include "kwm/random.hpp"

namespace kwm {

struct AugmentConfig {
  double shift_ms_min = -100.0;
  double shift_ms_max = 100.0;
  double resample_min = 0.85;
  double resample_max = 1.15;
  double noise_volume = 0.1;
  double noise_prob = 0.8;
  std::size_t n_time_masks = 2;
  std::size_t time_mask_max = 25;
  std::size_t n_freq_masks = 2;
  std::size_t freq_mask_max = 7;
  std::size_t clip_samples = 16000;
  std::uint64_t seed = 0;

  void validate() const;
};

struct WaveDraw {
  long shift_samples = 0;  // > 0 delays the audio
  double rate = 1.0;       // output sample j reads input position j * rate
  bool add_noise = false;
  std::size_t noise_index = 0;
  std::size_t noise_offset = 0;
};

WaveDraw draw_waveform_augment(const AugmentConfig& cfg, int sample_rate,
                               const std::vector<Waveform>& noise_pool, Rng& rng);
Waveform apply_waveform_augment(const Waveform& w, const WaveDraw& draw,
                                const std::vector<Waveform>& noise_pool,
                                const AugmentConfig& cfg);
Waveform augment_waveform(const Waveform& w, const std::vector<Waveform>& noise_pool,
                          const AugmentConfig& cfg, Rng& rng);

// Linear-interpolation resample to round(n / rate) samples.
std::vector<float> resample_linear(const std::vector<float>& x, double rate);

struct Mask {
  std::size_t start = 0;
  std::size_t width = 0;
};

struct MaskDraw {
  std::vector<Mask> time;  // columns
  std::vector<Mask> freq;  // rows
};

MaskDraw draw_masks(const AugmentConfig& cfg, std::size_t rows, std::size_t cols,
                    Rng& rng);
MfccMatrix apply_masks(const MfccMatrix& m, const MaskDraw& draw);
MfccMatrix spec_augment(const MfccMatrix& m, const AugmentConfig& cfg, Rng& rng);

}  // namespace kwm
