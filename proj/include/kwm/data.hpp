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

// Speech Commands ingestion: label vocabularies, speaker-hashed split
// manifests with synthesized silence and downsampled unknown, and batching.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "kwm/augment.hpp"
#include "kwm/features.hpp"
#include "kwm/tensor.hpp"

namespace kwm {

inline constexpr const char* kNoiseFolder = "_background_noise_";
inline constexpr const char* kSilenceLabel = "silence";
inline constexpr const char* kUnknownLabel = "unknown";
// Amplitude applied to background-noise crops that stand in for silence.
inline constexpr float kSilenceVolume = 0.1f;

enum class TaskName { kV1_12, kV1_30, kV2_12, kV2_35 };

std::string to_string(TaskName t);
TaskName parse_task_name(const std::string& text);

struct LabelTask {
  TaskName name = TaskName::kV1_12;
  std::vector<std::string> classes;

  bool twelve_way() const;
  std::size_t size() const { return classes.size(); }
  // -1 when the label is not a class.
  int index_of(const std::string& label) const;
};

// The fixed 12-way vocabulary: ten target words, then silence and unknown.
const std::vector<std::string>& twelve_way_classes();
// 12-way tasks need no directory; 30/35-way tasks read the word folders of
// `root` and require exactly 30 or 35 of them.
LabelTask make_task(TaskName name, const std::filesystem::path& root = {});

enum class Split { kTrain, kVal, kTest };
std::string to_string(Split s);
Split parse_split(const std::string& text);

// Stable speaker bucket: fnv1a(seed, speaker) mod 100 -> [0,80) train,
// [80,90) val, [90,100) test.
Split speaker_split(const std::string& speaker, std::uint64_t seed);
// Filename prefix before the first underscore.
std::string speaker_of(const std::string& relative_path);

struct ManifestEntry {
  std::string path;  // relative to the dataset root
  int label = 0;
  Split split = Split::kTrain;
  long offset = -1;  // sample offset of a silence crop; -1 for whole files
};

struct Manifest {
  LabelTask task;
  std::vector<ManifestEntry> entries;

  std::vector<std::size_t> indices(Split s) const;
  void write_csv(std::ostream& out) const;
  static Manifest read_csv(std::istream& in, const LabelTask& task);
};

struct ManifestOptions {
  std::uint64_t seed = 0;
  bool use_list_files = false;   // honour validation_list.txt / testing_list.txt
  bool balance_unknown = true;   // downsample unknown to the mean target count
  std::size_t clip_samples = 16000;
};

// Noise clips are cut 80:10:10 along time, so a split's silence crops only
// read its own segment of each clip.
struct NoiseSegment {
  std::string path;
  std::size_t begin = 0;
  std::size_t end = 0;
};
std::vector<NoiseSegment> noise_segments(const std::filesystem::path& root, Split s);

Manifest build_manifest(const std::filesystem::path& root, const LabelTask& task,
                        const ManifestOptions& options = {});

// Where examples come from. Implementations must be safe to call from one
// thread at a time.
class ExampleSource {
 public:
  virtual ~ExampleSource() = default;
  virtual Waveform load(const ManifestEntry& entry) const = 0;
};

class DirectorySource : public ExampleSource {
 public:
  explicit DirectorySource(std::filesystem::path root) : root_(std::move(root)) {}
  Waveform load(const ManifestEntry& entry) const override;
  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
};

// Waveforms held in memory, addressed by ManifestEntry::path.
class MemorySource : public ExampleSource {
 public:
  void add(const std::string& path, Waveform w);
  Waveform load(const ManifestEntry& entry) const override;

 private:
  std::vector<std::pair<std::string, Waveform>> clips_;
};

// Train-split noise segments loaded as waveforms for augmentation.
std::vector<Waveform> load_noise_pool(const std::filesystem::path& root, Split s);

struct Batch {
  Tensor features;                   // [B, 40, 98]
  std::vector<int> labels;
  std::vector<std::size_t> entries;  // manifest indices
  std::size_t size() const { return labels.size(); }
};

struct BatchOptions {
  std::size_t batch_size = 128;
  std::uint64_t shuffle_seed = 0;
  std::size_t epoch = 0;
  bool augment = true;  // ignored outside the train split
  AugmentConfig augment_config;
  MfccConfig mfcc_config;
  std::filesystem::path cache_dir;  // val/test feature cache; empty disables
  double max_skip_fraction = 0.01;
};

// Feature-cache key for one split: hash of the feature config and entries.
std::uint64_t feature_cache_key(const Manifest& m, Split s, const MfccConfig& c);

// Train order is a seeded per-epoch permutation; val/test keep manifest
// order. Unreadable examples are skipped and counted; exceeding
// max_skip_fraction of the split throws DataError.
class BatchStream {
 public:
  BatchStream(const Manifest& manifest, Split split, const ExampleSource& source,
              const std::vector<Waveform>& noise_pool, BatchOptions options);
  ~BatchStream();

  bool next(Batch& batch);
  std::size_t skipped() const { return skipped_; }
  std::size_t examples() const { return order_.size(); }

 private:
  bool featurize(std::size_t entry, std::size_t position, float* out);
  void load_or_build_cache();

  const Manifest& manifest_;
  Split split_;
  const ExampleSource& source_;
  const std::vector<Waveform>& noise_pool_;
  BatchOptions options_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::size_t skipped_ = 0;
  std::unique_ptr<MfccExtractor> extractor_;
  std::vector<float> cache_;  // [examples, 40*98] when cached
  std::vector<char> cache_valid_;
};

}  // namespace kwm
