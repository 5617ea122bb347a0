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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "kwm/config.hpp"
#include "kwm/data.hpp"
#include "kwm/error.hpp"
#include "kwm/random.hpp"

namespace kwm {

namespace fs = std::filesystem;

namespace {

constexpr Split kSplits[] = {Split::kTrain, Split::kVal, Split::kTest};

bool is_wav(const fs::path& p) { return p.extension() == ".wav"; }

std::vector<std::string> word_folders(const fs::path& root) {
  if (!fs::is_directory(root)) {
    throw DataError("dataset root " + root.string() + " is not a directory");
  }
  std::vector<std::string> words;
  for (const auto& e : fs::directory_iterator(root)) {
    const std::string name = e.path().filename().string();
    if (e.is_directory() && !name.empty() && name[0] != '_' && name[0] != '.') {
      words.push_back(name);
    }
  }
  std::sort(words.begin(), words.end());
  return words;
}

std::vector<std::string> wavs_in(const fs::path& root, const std::string& folder) {
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(root / folder)) {
    if (e.is_regular_file() && is_wav(e.path())) {
      out.push_back(folder + "/" + e.path().filename().string());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::set<std::string> read_list(const fs::path& p) {
  std::set<std::string> out;
  std::ifstream in(p);
  if (!in) throw DataError("cannot read list file " + p.string());
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) out.insert(line);
  }
  return out;
}

// Fisher-Yates with our own RNG so the order is portable.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
    std::swap(v[i - 1], v[j]);
  }
}

std::size_t split_index(Split s) { return static_cast<std::size_t>(s); }

}  // namespace

std::string to_string(TaskName t) {
  switch (t) {
    case TaskName::kV1_12: return "V1-12";
    case TaskName::kV1_30: return "V1-30";
    case TaskName::kV2_12: return "V2-12";
    case TaskName::kV2_35: return "V2-35";
  }
  return "?";
}

TaskName parse_task_name(const std::string& text) {
  for (TaskName t : {TaskName::kV1_12, TaskName::kV1_30, TaskName::kV2_12, TaskName::kV2_35}) {
    if (to_string(t) == text) return t;
  }
  throw ConfigError("unknown task '" + text + "' (expected V1-12, V1-30, V2-12 or V2-35)");
}

bool LabelTask::twelve_way() const {
  return name == TaskName::kV1_12 || name == TaskName::kV2_12;
}

int LabelTask::index_of(const std::string& label) const {
  auto it = std::find(classes.begin(), classes.end(), label);
  return it == classes.end() ? -1 : static_cast<int>(it - classes.begin());
}

const std::vector<std::string>& twelve_way_classes() {
  static const std::vector<std::string> classes = {
      "up", "down", "left", "right", "yes", "no", "on", "off", "go", "stop",
      kSilenceLabel, kUnknownLabel};
  return classes;
}

LabelTask make_task(TaskName name, const fs::path& root) {
  LabelTask task;
  task.name = name;
  if (task.twelve_way()) {
    task.classes = twelve_way_classes();
    return task;
  }
  task.classes = word_folders(root);
  const std::size_t want = name == TaskName::kV1_30 ? 30 : 35;
  if (task.classes.size() != want) {
    throw DataError(to_string(name) + " expects " + std::to_string(want) +
                    " word folders under " + root.string() + ", found " +
                    std::to_string(task.classes.size()));
  }
  return task;
}

std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(const std::string& text) {
  for (Split s : kSplits) {
    if (to_string(s) == text) return s;
  }
  if (text == "validation") return Split::kVal;
  throw ConfigError("unknown split '" + text + "' (expected train, val or test)");
}

std::string speaker_of(const std::string& relative_path) {
  const std::string name = fs::path(relative_path).filename().string();
  return name.substr(0, name.find('_'));
}

Split speaker_split(const std::string& speaker, std::uint64_t seed) {
  const std::uint64_t bucket = fnv1a64(std::to_string(seed) + ":" + speaker) % 100;
  if (bucket < 80) return Split::kTrain;
  if (bucket < 90) return Split::kVal;
  return Split::kTest;
}

std::vector<std::size_t> Manifest::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].split == s) out.push_back(i);
  }
  return out;
}

void Manifest::write_csv(std::ostream& out) const {
  out << "path,label,split\n";
  for (const auto& e : entries) {
    out << e.path;
    if (e.offset >= 0) out << '@' << e.offset;
    out << ',' << e.label << ',' << to_string(e.split) << '\n';
  }
}

Manifest Manifest::read_csv(std::istream& in, const LabelTask& task) {
  Manifest m;
  m.task = task;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("path,", 0) == 0) continue;
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string path, label, split;
    if (!std::getline(row, path, ',') || !std::getline(row, label, ',') ||
        !std::getline(row, split)) {
      throw DataError("manifest line " + std::to_string(line_no) + ": expected path,label,split");
    }
    ManifestEntry e;
    const auto at = path.rfind('@');
    if (at != std::string::npos) {
      e.offset = std::stol(path.substr(at + 1));
      path.resize(at);
    }
    e.path = path;
    e.label = std::stoi(label);
    if (e.label < 0 || static_cast<std::size_t>(e.label) >= task.size()) {
      throw DataError("manifest line " + std::to_string(line_no) + ": label out of range");
    }
    e.split = parse_split(split);
    m.entries.push_back(std::move(e));
  }
  return m;
}

std::vector<NoiseSegment> noise_segments(const fs::path& root, Split s) {
  const fs::path dir = root / kNoiseFolder;
  if (!fs::is_directory(dir)) {
    throw DataError("missing " + std::string(kNoiseFolder) + " folder under " + root.string());
  }
  std::vector<NoiseSegment> out;
  for (const std::string& rel : wavs_in(root, kNoiseFolder)) {
    const std::size_t n = load_wav(root / rel).samples.size();
    const std::size_t cut1 = n * 8 / 10, cut2 = n * 9 / 10;
    switch (s) {
      case Split::kTrain: out.push_back({rel, 0, cut1}); break;
      case Split::kVal: out.push_back({rel, cut1, cut2}); break;
      case Split::kTest: out.push_back({rel, cut2, n}); break;
    }
  }
  if (out.empty()) throw DataError("no noise clips in " + dir.string());
  return out;
}

Manifest build_manifest(const fs::path& root, const LabelTask& task,
                        const ManifestOptions& options) {
  const auto folders = word_folders(root);
  std::set<std::string> val_list, test_list;
  if (options.use_list_files) {
    val_list = read_list(root / "validation_list.txt");
    test_list = read_list(root / "testing_list.txt");
  }
  auto assign = [&](const std::string& rel) {
    if (options.use_list_files) {
      if (val_list.count(rel)) return Split::kVal;
      if (test_list.count(rel)) return Split::kTest;
      return Split::kTrain;
    }
    return speaker_split(speaker_of(rel), options.seed);
  };

  Manifest m;
  m.task = task;
  std::vector<std::vector<ManifestEntry>> unknown(3);
  std::vector<std::size_t> target_count(3, 0);
  std::size_t total = 0;
  for (const std::string& word : folders) {
    const int label = task.index_of(word);
    const bool target = label >= 0 && word != kSilenceLabel && word != kUnknownLabel;
    if (!target && !task.twelve_way()) continue;
    for (const std::string& rel : wavs_in(root, word)) {
      ++total;
      ManifestEntry e{rel, label, assign(rel), -1};
      if (target) {
        ++target_count[split_index(e.split)];
        m.entries.push_back(std::move(e));
      } else {
        e.label = task.index_of(kUnknownLabel);
        unknown[split_index(e.split)].push_back(std::move(e));
      }
    }
  }
  if (total == 0) throw DataError("no .wav files under " + root.string());
  if (!task.twelve_way()) return m;
  if (!fs::is_directory(root / kNoiseFolder)) {
    throw DataError(to_string(task.name) + " needs " + kNoiseFolder + " under " +
                    root.string() + " to synthesize silence");
  }

  const double targets = static_cast<double>(task.size() - 2);
  for (Split s : kSplits) {
    const std::size_t i = split_index(s);
    const auto mean = static_cast<std::size_t>(std::llround(target_count[i] / targets));
    auto& pool = unknown[i];
    if (options.balance_unknown && pool.size() > mean) {
      Rng rng(derive_seed(options.seed, 100 + i));
      shuffle(pool, rng);
      pool.resize(mean);
      std::sort(pool.begin(), pool.end(),
                [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
    }
    m.entries.insert(m.entries.end(), pool.begin(), pool.end());

    if (mean == 0) continue;
    std::vector<NoiseSegment> segments;
    for (auto& seg : noise_segments(root, s)) {
      if (seg.end - seg.begin >= options.clip_samples) segments.push_back(seg);
    }
    if (segments.empty()) {
      throw DataError("no " + to_string(s) + " noise segment is at least one clip long");
    }
    Rng rng(derive_seed(options.seed, 200 + i));
    const int label = task.index_of(kSilenceLabel);
    for (std::size_t k = 0; k < mean; ++k) {
      const auto& seg = segments[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(segments.size()) - 1))];
      const auto offset = rng.uniform_int(
          static_cast<std::int64_t>(seg.begin),
          static_cast<std::int64_t>(seg.end - options.clip_samples));
      m.entries.push_back(ManifestEntry{seg.path, label, s, static_cast<long>(offset)});
    }
  }
  return m;
}

}  // namespace kwm
