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

// Audio front end: PCM WAV I/O and the 40 x 98 MFCC matrix.

#include <cstddef>
#include <filesystem>
#include <memory>
#include <ostream>
#include <vector>

#include "kwm/tensor.hpp"

namespace kwm {

struct Waveform {
  std::vector<float> samples;  // in [-1, 1]
  int sample_rate = 16000;
};

struct MfccMatrix {
  Tensor coeffs;                  // [n_coeffs, frames]
  std::size_t source_frames = 0;  // columns >= this are zero padding
};

struct MfccConfig {
  int sample_rate = 16000;
  std::size_t window = 480;  // 30 ms
  std::size_t hop = 160;     // 10 ms
  std::size_t fft_size = 512;
  std::size_t n_mels = 40;
  std::size_t n_coeffs = 40;
  double f_min = 20.0;
  double f_max = 8000.0;
  double log_floor = 1e-10;
  std::size_t frames = 98;
};

// Frames produced for `num_samples` samples before padding/truncation:
// 1 + (n - window) / hop, and one zero-padded frame for 0 < n < window.
std::size_t frame_count(std::size_t num_samples, const MfccConfig& config);

// Hann window -> |FFT| -> HTK mel filterbank -> log -> orthonormal DCT-II,
// then zero-pad or truncate the time axis. Owns its FFT plan; one instance
// per thread.
class MfccExtractor {
 public:
  explicit MfccExtractor(const MfccConfig& config = {});
  ~MfccExtractor();
  MfccExtractor(const MfccExtractor&) = delete;
  MfccExtractor& operator=(const MfccExtractor&) = delete;

  const MfccConfig& config() const { return config_; }
  // Throws DataError for empty audio or a sample rate other than the config's.
  MfccMatrix compute(const Waveform& wave) const;

  // [n_mels, fft_size / 2 + 1] triangular weights.
  const std::vector<float>& filterbank() const { return filterbank_; }

 private:
  struct Fft;
  MfccConfig config_;
  std::vector<float> window_;
  std::vector<float> filterbank_;
  std::vector<float> dct_;  // [n_coeffs, n_mels]
  std::unique_ptr<Fft> fft_;
};

// Default-config MFCC through a thread-local extractor.
MfccMatrix mfcc(const Waveform& wave);

// PCM 16-bit mono RIFF/WAVE. Samples are scaled by 1/32768. Throws
// FormatError (with the byte offset) for malformed or unsupported files.
Waveform load_wav(const std::filesystem::path& path);
Waveform parse_wav(const std::vector<char>& bytes);
void write_wav(const std::filesystem::path& path, const Waveform& wave);

// One row per coefficient, one column per frame.
void write_mfcc_csv(std::ostream& out, const MfccMatrix& m);

}  // namespace kwm
