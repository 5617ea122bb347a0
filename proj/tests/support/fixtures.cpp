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

#include "fixtures.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <numbers>

#include <unistd.h>

#include "kwm/random.hpp"

namespace kwm::testing {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const fs::path dir = fs::temp_directory_path() /
                       ("kwm-" + tag + "-" + std::to_string(::getpid()) + "-" +
                        std::to_string(counter++));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Waveform tone(double hz, double seconds, double amplitude, int sample_rate) {
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.resize(static_cast<std::size_t>(std::lround(seconds * sample_rate)));
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    w.samples[i] = static_cast<float>(
        amplitude * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / sample_rate));
  }
  return w;
}

Waveform white_noise(double seconds, double amplitude, std::uint64_t seed) {
  Rng rng(seed);
  Waveform w;
  w.samples.resize(static_cast<std::size_t>(std::lround(seconds * w.sample_rate)));
  for (float& s : w.samples) s = static_cast<float>(rng.uniform(-amplitude, amplitude));
  return w;
}

void write_speech_fixture(const fs::path& root, const SpeechFixture& fx) {
  fs::create_directories(root);
  for (std::size_t w = 0; w < fx.words.size(); ++w) {
    fs::create_directories(root / fx.words[w]);
    for (std::size_t s = 0; s < fx.speakers; ++s) {
      char speaker[16];
      std::snprintf(speaker, sizeof speaker, "%08zx", 0x1000 * (s + 1) + 7 * s);
      for (std::size_t k = 0; k < fx.clips_per_speaker; ++k) {
        Waveform clip = tone(300.0 + 150.0 * static_cast<double>(w), fx.clip_seconds,
                             0.2 + 0.01 * static_cast<double>(s % 10));
        write_wav(root / fx.words[w] /
                      (std::string(speaker) + "_nohash_" + std::to_string(k) + ".wav"),
                  clip);
      }
    }
  }
  if (fx.noise_folder) {
    fs::create_directories(root / "_background_noise_");
    for (std::size_t i = 0; i < fx.noise_files; ++i) {
      write_wav(root / "_background_noise_" / ("noise" + std::to_string(i) + ".wav"),
                white_noise(fx.noise_seconds, 0.5, 1000 + i));
    }
  }
}

Tensor synthetic_features(int label, Rng& rng) {
  Waveform w;
  w.samples.assign(16000, 0.0f);
  const double hz = 300.0 + 250.0 * label;
  const double level = rng.uniform(0.2, 0.6);
  const auto onset = static_cast<std::size_t>(rng.uniform_int(0, 4800));
  for (std::size_t i = 0; i < 6400; ++i) {
    const double t = static_cast<double>(i) / 16000.0;
    w.samples[onset + i] = static_cast<float>(level * std::sin(2.0 * std::numbers::pi * hz * t));
  }
  for (float& s : w.samples) s += static_cast<float>(rng.uniform(-0.01, 0.01));
  return mfcc(w).coeffs;
}

TensorDataset synthetic_dataset(std::size_t classes, std::size_t n_train, std::size_t n_val,
                                std::size_t n_test, std::uint64_t seed) {
  TensorDataset ds(classes);
  Rng rng(seed);
  const std::pair<Split, std::size_t> plan[] = {
      {Split::kTrain, n_train}, {Split::kVal, n_val}, {Split::kTest, n_test}};
  for (auto [split, n] : plan) {
    for (std::size_t i = 0; i < n; ++i) {
      const int label = static_cast<int>(i % classes);
      ds.add(split, synthetic_features(label, rng), label);
    }
  }
  return ds;
}

}  // namespace kwm::testing
