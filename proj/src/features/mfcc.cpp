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

#include <fftw3.h>

#include <cmath>
#include <iomanip>
#include <mutex>
#include <numbers>

#include "kwm/error.hpp"
#include "kwm/features.hpp"

namespace kwm {

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// FFTW's planner is not reentrant; executing distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

struct MfccExtractor::Fft {
  explicit Fft(std::size_t n) : size(n) {
    in = fftwf_alloc_real(n);
    out = fftwf_alloc_complex(n / 2 + 1);
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan = fftwf_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
  }
  ~Fft() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftwf_destroy_plan(plan);
    fftwf_free(in);
    fftwf_free(out);
  }
  std::size_t size;
  float* in;
  fftwf_complex* out;
  fftwf_plan plan;
};

std::size_t frame_count(std::size_t num_samples, const MfccConfig& c) {
  if (num_samples == 0) return 0;
  if (num_samples < c.window) return 1;
  return 1 + (num_samples - c.window) / c.hop;
}

MfccExtractor::MfccExtractor(const MfccConfig& config) : config_(config) {
  if (config_.window == 0 || config_.hop == 0 || config_.fft_size < config_.window ||
      config_.n_mels == 0 || config_.n_coeffs == 0 ||
      config_.n_coeffs > config_.n_mels || !(config_.log_floor > 0.0) ||
      !(config_.f_max > config_.f_min)) {
    throw ConfigError("mfcc: inconsistent feature configuration");
  }
  const double pi = std::numbers::pi;
  window_.resize(config_.window);
  for (std::size_t n = 0; n < config_.window; ++n) {
    window_[n] = static_cast<float>(
        0.5 - 0.5 * std::cos(2.0 * pi * static_cast<double>(n) / config_.window));
  }

  const std::size_t bins = config_.fft_size / 2 + 1;
  const std::size_t M = config_.n_mels;
  std::vector<double> edges(M + 2);
  const double mel_lo = hz_to_mel(config_.f_min), mel_hi = hz_to_mel(config_.f_max);
  for (std::size_t i = 0; i < M + 2; ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / (M + 1));
  }
  filterbank_.assign(M * bins, 0.0f);
  for (std::size_t m = 0; m < M; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double hz = static_cast<double>(k) * config_.sample_rate / config_.fft_size;
      double w = 0.0;
      if (hz > left && hz <= center) w = (hz - left) / (center - left);
      else if (hz > center && hz < right) w = (right - hz) / (right - center);
      filterbank_[m * bins + k] = static_cast<float>(w);
    }
  }

  dct_.resize(config_.n_coeffs * M);
  for (std::size_t k = 0; k < config_.n_coeffs; ++k) {
    const double norm = k == 0 ? std::sqrt(1.0 / M) : std::sqrt(2.0 / M);
    for (std::size_t m = 0; m < M; ++m) {
      dct_[k * M + m] = static_cast<float>(
          norm * std::cos(pi * static_cast<double>(k) * (m + 0.5) / M));
    }
  }
  fft_ = std::make_unique<Fft>(config_.fft_size);
}

MfccExtractor::~MfccExtractor() = default;

MfccMatrix MfccExtractor::compute(const Waveform& wave) const {
  if (wave.samples.empty()) throw DataError("mfcc: empty waveform");
  if (wave.sample_rate != config_.sample_rate) {
    throw DataError("mfcc: sample rate " + std::to_string(wave.sample_rate) +
                    " Hz, expected " + std::to_string(config_.sample_rate) + " Hz");
  }
  const std::size_t bins = config_.fft_size / 2 + 1;
  const std::size_t M = config_.n_mels, C = config_.n_coeffs, T = config_.frames;
  const std::size_t frames = std::min(frame_count(wave.samples.size(), config_), T);

  std::vector<float> out(C * T, 0.0f);
  std::vector<double> magnitude(bins), logmel(M);
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t start = f * config_.hop;
    for (std::size_t n = 0; n < config_.fft_size; ++n) {
      const std::size_t s = start + n;
      fft_->in[n] = (n < config_.window && s < wave.samples.size())
                        ? wave.samples[s] * window_[n]
                        : 0.0f;
    }
    fftwf_execute_dft_r2c(fft_->plan, fft_->in, fft_->out);
    for (std::size_t k = 0; k < bins; ++k) {
      magnitude[k] = std::hypot(static_cast<double>(fft_->out[k][0]),
                                static_cast<double>(fft_->out[k][1]));
    }
    for (std::size_t m = 0; m < M; ++m) {
      double energy = 0.0;
      for (std::size_t k = 0; k < bins; ++k) energy += filterbank_[m * bins + k] * magnitude[k];
      logmel[m] = std::log(std::max(energy, config_.log_floor));
    }
    for (std::size_t k = 0; k < C; ++k) {
      double acc = 0.0;
      for (std::size_t m = 0; m < M; ++m) acc += dct_[k * M + m] * logmel[m];
      out[k * T + f] = static_cast<float>(acc);
    }
  }
  return MfccMatrix{Tensor({C, T}, std::move(out)), frames};
}

MfccMatrix mfcc(const Waveform& wave) {
  thread_local MfccExtractor extractor;
  return extractor.compute(wave);
}

void write_mfcc_csv(std::ostream& out, const MfccMatrix& m) {
  const std::size_t rows = m.coeffs.size(0), cols = m.coeffs.size(1);
  auto v = m.coeffs.data();
  out << std::setprecision(9);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (c) out << ',';
      out << v[r * cols + c];
    }
    out << '\n';
  }
}

}  // namespace kwm
