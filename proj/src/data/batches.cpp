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

#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

#include "kwm/config.hpp"
#include "kwm/data.hpp"
#include "kwm/error.hpp"
#include "kwm/random.hpp"

namespace kwm {

namespace fs = std::filesystem;

namespace {

constexpr char kCacheMagic[8] = {'K', 'W', 'M', 'F', 'E', 'A', 'T', '1'};

Waveform crop_silence(Waveform w, const ManifestEntry& e) {
  if (e.offset < 0) return w;
  const auto begin = static_cast<std::size_t>(e.offset);
  const auto len = static_cast<std::size_t>(w.sample_rate);
  if (begin + len > w.samples.size()) {
    throw DataError(e.path + ": silence crop at " + std::to_string(e.offset) +
                    " runs past the end of the clip");
  }
  std::vector<float> crop(w.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                          w.samples.begin() + static_cast<std::ptrdiff_t>(begin + len));
  for (float& s : crop) s *= kSilenceVolume;
  w.samples = std::move(crop);
  return w;
}

}  // namespace

Waveform DirectorySource::load(const ManifestEntry& entry) const {
  return crop_silence(load_wav(root_ / entry.path), entry);
}

void MemorySource::add(const std::string& path, Waveform w) {
  clips_.emplace_back(path, std::move(w));
}

Waveform MemorySource::load(const ManifestEntry& entry) const {
  for (const auto& [path, w] : clips_) {
    if (path == entry.path) return crop_silence(w, entry);
  }
  throw DataError("no in-memory clip named " + entry.path);
}

std::vector<Waveform> load_noise_pool(const fs::path& root, Split s) {
  std::vector<Waveform> pool;
  for (const auto& seg : noise_segments(root, s)) {
    Waveform w = load_wav(root / seg.path);
    w.samples = std::vector<float>(w.samples.begin() + static_cast<std::ptrdiff_t>(seg.begin),
                                   w.samples.begin() + static_cast<std::ptrdiff_t>(seg.end));
    pool.push_back(std::move(w));
  }
  return pool;
}

std::uint64_t feature_cache_key(const Manifest& m, Split s, const MfccConfig& c) {
  std::ostringstream text;
  text << "mfcc " << c.sample_rate << ' ' << c.window << ' ' << c.hop << ' ' << c.fft_size
       << ' ' << c.n_mels << ' ' << c.n_coeffs << ' ' << c.f_min << ' ' << c.f_max << ' '
       << c.log_floor << ' ' << c.frames << " silence " << kSilenceVolume << '\n';
  for (std::size_t i : m.indices(s)) {
    const auto& e = m.entries[i];
    text << e.path << '@' << e.offset << ',' << e.label << '\n';
  }
  return fnv1a64(text.str());
}

BatchStream::BatchStream(const Manifest& manifest, Split split, const ExampleSource& source,
                         const std::vector<Waveform>& noise_pool, BatchOptions options)
    : manifest_(manifest),
      split_(split),
      source_(source),
      noise_pool_(noise_pool),
      options_(std::move(options)),
      order_(manifest.indices(split)),
      extractor_(std::make_unique<MfccExtractor>(options_.mfcc_config)) {
  if (options_.batch_size == 0) throw ConfigError("batch size must be positive");
  if (split_ == Split::kTrain) {
    Rng rng(derive_seed(options_.shuffle_seed, options_.epoch));
    for (std::size_t i = order_.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
      std::swap(order_[i - 1], order_[j]);
    }
  } else if (!options_.cache_dir.empty()) {
    load_or_build_cache();
  }
}

BatchStream::~BatchStream() = default;

bool BatchStream::featurize(std::size_t entry, std::size_t position, float* out) {
  const std::size_t cells = options_.mfcc_config.n_coeffs * options_.mfcc_config.frames;
  if (!cache_.empty()) {
    if (!cache_valid_[position]) return false;
    std::memcpy(out, cache_.data() + position * cells, cells * sizeof(float));
    return true;
  }
  try {
    Waveform w = source_.load(manifest_.entries[entry]);
    MfccMatrix m;
    if (split_ == Split::kTrain && options_.augment) {
      Rng rng(derive_seed(derive_seed(options_.augment_config.seed, options_.epoch), entry));
      m = spec_augment(extractor_->compute(augment_waveform(w, noise_pool_, options_.augment_config, rng)),
                       options_.augment_config, rng);
    } else {
      m = extractor_->compute(w);
    }
    std::memcpy(out, m.coeffs.data().data(), cells * sizeof(float));
    return true;
  } catch (const FormatError& e) {
    std::cerr << "kwm: skipping " << manifest_.entries[entry].path << ": " << e.what() << '\n';
  } catch (const DataError& e) {
    std::cerr << "kwm: skipping " << manifest_.entries[entry].path << ": " << e.what() << '\n';
  }
  return false;
}

void BatchStream::load_or_build_cache() {
  const std::size_t cells = options_.mfcc_config.n_coeffs * options_.mfcc_config.frames;
  const std::uint64_t key = feature_cache_key(manifest_, split_, options_.mfcc_config);
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(key));
  const fs::path file = options_.cache_dir / (to_string(split_) + "-" + hex + ".bin");
  const std::uint64_t n = order_.size();

  std::ifstream in(file, std::ios::binary);
  if (in) {
    char magic[8];
    std::uint64_t count = 0, per = 0;
    in.read(magic, 8);
    in.read(reinterpret_cast<char*>(&count), 8);
    in.read(reinterpret_cast<char*>(&per), 8);
    if (in && std::memcmp(magic, kCacheMagic, 8) == 0 && count == n && per == cells) {
      cache_valid_.resize(n);
      cache_.resize(n * cells);
      in.read(cache_valid_.data(), static_cast<std::streamsize>(n));
      in.read(reinterpret_cast<char*>(cache_.data()),
              static_cast<std::streamsize>(cache_.size() * sizeof(float)));
      if (in) return;
    }
    cache_.clear();
    cache_valid_.clear();
  }

  std::vector<float> features(n * cells, 0.0f);
  std::vector<char> valid(n, 0);
  for (std::size_t p = 0; p < n; ++p) {
    valid[p] = featurize(order_[p], p, features.data() + p * cells) ? 1 : 0;
  }
  fs::create_directories(options_.cache_dir);
  const fs::path tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    const std::uint64_t per = cells;
    out.write(kCacheMagic, 8);
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(reinterpret_cast<const char*>(&per), 8);
    out.write(valid.data(), static_cast<std::streamsize>(n));
    out.write(reinterpret_cast<const char*>(features.data()),
              static_cast<std::streamsize>(features.size() * sizeof(float)));
    if (!out) throw Error("cannot write feature cache " + tmp.string());
  }
  fs::rename(tmp, file);
  cache_ = std::move(features);
  cache_valid_ = std::move(valid);
}

bool BatchStream::next(Batch& batch) {
  const std::size_t cells = options_.mfcc_config.n_coeffs * options_.mfcc_config.frames;
  std::vector<float> data;
  data.reserve(options_.batch_size * cells);
  batch.labels.clear();
  batch.entries.clear();
  std::vector<float> row(cells);
  while (batch.labels.size() < options_.batch_size && cursor_ < order_.size()) {
    const std::size_t position = cursor_++;
    const std::size_t entry = order_[position];
    if (!featurize(entry, position, row.data())) {
      ++skipped_;
      if (static_cast<double>(skipped_) >
          options_.max_skip_fraction * static_cast<double>(order_.size())) {
        throw DataError(std::to_string(skipped_) + " of " + std::to_string(order_.size()) + " " +
                        to_string(split_) + " examples were unreadable");
      }
      continue;
    }
    data.insert(data.end(), row.begin(), row.end());
    batch.labels.push_back(manifest_.entries[entry].label);
    batch.entries.push_back(entry);
  }
  if (batch.labels.empty()) return false;
  batch.features = Tensor({batch.labels.size(), options_.mfcc_config.n_coeffs,
                           options_.mfcc_config.frames},
                          std::move(data));
  return true;
}

}  // namespace kwm
