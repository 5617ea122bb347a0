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

// Synthetic audio, a miniature Speech Commands tree and in-memory datasets.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kwm/features.hpp"
#include "kwm/harness.hpp"

namespace kwm::testing {

// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& tag);

Waveform tone(double hz, double seconds, double amplitude, int sample_rate = 16000);
Waveform white_noise(double seconds, double amplitude, std::uint64_t seed);

struct SpeechFixture {
  std::vector<std::string> words;
  std::size_t speakers = 20;
  std::size_t clips_per_speaker = 1;
  double clip_seconds = 0.25;
  std::size_t noise_files = 2;
  double noise_seconds = 12.0;
  bool noise_folder = true;
};

// Writes <root>/<word>/<speaker>_nohash_<k>.wav (speaker = 8 hex digits)
// and, optionally, <root>/_background_noise_/noise<i>.wav.
void write_speech_fixture(const std::filesystem::path& root, const SpeechFixture& fx);

// One class-dependent tone per example (random onset, level and noise),
// featurized with the real MFCC front end.
Tensor synthetic_features(int label, Rng& rng);

// `per_split[s]` examples for split s, labels cycling through the classes.
TensorDataset synthetic_dataset(std::size_t classes, std::size_t n_train, std::size_t n_val,
                                std::size_t n_test, std::uint64_t seed);

}  // namespace kwm::testing
