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
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "kwm/data.hpp"
#include "kwm/error.hpp"

using namespace kwm;
using namespace kwm::testing;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kWords = {"yes", "no", "up", "cat", "dog", "bird"};

struct Fixture {
  fs::path root;
  Fixture() : root(temp_dir("speech")) {
    SpeechFixture fx;
    fx.words = kWords;
    fx.speakers = 40;
    write_speech_fixture(root, fx);
  }
  ~Fixture() { fs::remove_all(root); }
};

std::string csv(const Manifest& m) {
  std::ostringstream s;
  m.write_csv(s);
  return s.str();
}

// Hand-built manifest over in-memory clips.
Manifest memory_manifest(MemorySource& src, std::size_t n, Split split) {
  Manifest m;
  m.task = make_task(TaskName::kV1_12);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string path = "w/" + std::to_string(i) + ".wav";
    src.add(path, tone(200.0 + 10.0 * i, 0.5, 0.3));
    m.entries.push_back({path, static_cast<int>(i % 12), split, -1});
  }
  return m;
}

}  // namespace

TEST_CASE("label vocabularies") {
  const LabelTask t = make_task(TaskName::kV2_12);
  REQUIRE(t.size() == 12);
  CHECK(t.classes.front() == "up");
  CHECK(t.classes[9] == "stop");
  CHECK(t.classes[10] == "silence");
  CHECK(t.classes[11] == "unknown");
  CHECK(t.index_of("go") == 8);
  CHECK(t.index_of("cat") == -1);
  CHECK(parse_task_name("V2-35") == TaskName::kV2_35);
  CHECK_THROWS_AS(parse_task_name("V3-12"), ConfigError);

  const fs::path root = temp_dir("vocab");
  for (int i = 29; i >= 0; --i) fs::create_directories(root / ("w" + std::to_string(100 + i)));
  fs::create_directories(root / "_background_noise_");
  const LabelTask v30 = make_task(TaskName::kV1_30, root);
  CHECK(v30.size() == 30);
  CHECK(std::is_sorted(v30.classes.begin(), v30.classes.end()));
  CHECK_THROWS_AS(make_task(TaskName::kV2_35, root), DataError);
  fs::remove_all(root);
}

TEST_CASE("speaker hashing gives roughly 80:10:10") {
  std::map<Split, int> counts;
  for (int i = 0; i < 20000; ++i) counts[speaker_split("spk" + std::to_string(i), 0)]++;
  CHECK(counts[Split::kTrain] == doctest::Approx(16000).epsilon(0.02));
  CHECK(counts[Split::kVal] == doctest::Approx(2000).epsilon(0.08));
  CHECK(counts[Split::kTest] == doctest::Approx(2000).epsilon(0.08));
  CHECK(speaker_of("yes/0a2b400e_nohash_0.wav") == "0a2b400e");
}

TEST_CASE("12-way manifest") {
  Fixture fx;
  ManifestOptions opt;
  opt.seed = 5;
  const LabelTask task = make_task(TaskName::kV1_12);
  const Manifest m = build_manifest(fx.root, task, opt);

  SUBCASE("deterministic") { CHECK(csv(m) == csv(build_manifest(fx.root, task, opt))); }

  SUBCASE("speakers never cross splits") {
    std::map<std::string, Split> where;
    for (const auto& e : m.entries) {
      if (e.offset >= 0) continue;
      auto [it, fresh] = where.emplace(speaker_of(e.path), e.split);
      CHECK(it->second == e.split);
    }
  }

  SUBCASE("unknown and silence follow the mean target count") {
    for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
      std::map<int, std::size_t> per_label;
      for (std::size_t i : m.indices(s)) per_label[m.entries[i].label]++;
      const double targets = static_cast<double>(per_label[task.index_of("yes")] +
                                                 per_label[task.index_of("no")] +
                                                 per_label[task.index_of("up")]) / 10.0;
      const auto mean = static_cast<std::size_t>(std::llround(targets));
      INFO("split " << to_string(s));
      CHECK(per_label[task.index_of("silence")] == mean);
      CHECK(per_label[task.index_of("unknown")] == std::min<std::size_t>(mean, per_label[task.index_of("unknown")]));
      CHECK(per_label[task.index_of("unknown")] <= mean);
    }
  }

  SUBCASE("labels in range, silence crops inside their split's noise segment") {
    for (const auto& e : m.entries) {
      CHECK(e.label >= 0);
      CHECK(e.label < 12);
      if (e.offset < 0) continue;
      CHECK(e.label == task.index_of("silence"));
      bool inside = false;
      for (const auto& seg : noise_segments(fx.root, e.split)) {
        inside = inside || (seg.path == e.path && static_cast<std::size_t>(e.offset) >= seg.begin &&
                            static_cast<std::size_t>(e.offset) + 16000 <= seg.end);
      }
      CHECK(inside);
    }
  }

  SUBCASE("CSV round trip") {
    std::istringstream in(csv(m));
    const Manifest back = Manifest::read_csv(in, task);
    CHECK(csv(back) == csv(m));
  }

  SUBCASE("silence examples load as scaled noise crops") {
    DirectorySource src(fx.root);
    for (const auto& e : m.entries) {
      if (e.offset < 0) continue;
      const Waveform w = src.load(e);
      CHECK(w.samples.size() == 16000);
      const Waveform full = load_wav(fx.root / e.path);
      CHECK(w.samples[10] == full.samples[e.offset + 10] * kSilenceVolume);
      break;
    }
  }
}

TEST_CASE("list files override speaker hashing") {
  Fixture fx;
  std::ofstream(fx.root / "validation_list.txt") << "yes/00001000_nohash_0.wav\n";
  std::ofstream(fx.root / "testing_list.txt") << "no/00001000_nohash_0.wav\n";
  ManifestOptions opt;
  opt.use_list_files = true;
  const Manifest m = build_manifest(fx.root, make_task(TaskName::kV1_12), opt);
  for (const auto& e : m.entries) {
    if (e.path == "yes/00001000_nohash_0.wav") CHECK(e.split == Split::kVal);
    else if (e.path == "no/00001000_nohash_0.wav") CHECK(e.split == Split::kTest);
    else if (e.offset < 0 && e.path.rfind("yes/", 0) == 0) CHECK(e.split == Split::kTrain);
  }
}

TEST_CASE("manifest errors") {
  CHECK_THROWS_AS(build_manifest("/nonexistent/kwm", make_task(TaskName::kV1_12)), DataError);
  const fs::path empty = temp_dir("empty");
  fs::create_directories(empty / "yes");
  CHECK_THROWS_AS(build_manifest(empty, make_task(TaskName::kV1_12)), DataError);
  fs::remove_all(empty);

  const fs::path quiet = temp_dir("quiet");
  SpeechFixture fx;
  fx.words = {"yes", "no"};
  fx.noise_folder = false;
  write_speech_fixture(quiet, fx);
  CHECK_THROWS_AS(build_manifest(quiet, make_task(TaskName::kV1_12)), DataError);
  fs::remove_all(quiet);
}

TEST_CASE("batching") {
  MemorySource src;
  const Manifest m = memory_manifest(src, 130, Split::kTest);

  SUBCASE("remainder batch and determinism") {
    std::vector<std::size_t> sizes;
    std::vector<float> first;
    BatchStream a(m, Split::kTest, src, {}, BatchOptions{});
    Batch b;
    while (a.next(b)) {
      sizes.push_back(b.size());
      if (first.empty()) first.assign(b.features.data().begin(), b.features.data().end());
      CHECK(b.features.shape() == Shape{b.size(), 40, 98});
    }
    CHECK(sizes == std::vector<std::size_t>{128, 2});
    BatchStream again(m, Split::kTest, src, {}, BatchOptions{});
    REQUIRE(again.next(b));
    CHECK(std::equal(first.begin(), first.end(), b.features.data().begin()));
  }

  SUBCASE("evaluation features equal raw MFCC output") {
    BatchStream s(m, Split::kTest, src, {}, BatchOptions{});
    Batch b;
    REQUIRE(s.next(b));
    for (std::size_t k : {0u, 17u, 127u}) {
      const MfccMatrix raw = mfcc(src.load(m.entries[b.entries[k]]));
      CHECK(std::equal(raw.coeffs.data().begin(), raw.coeffs.data().end(),
                       b.features.data().begin() + static_cast<std::ptrdiff_t>(k * 40 * 98)));
    }
  }

  SUBCASE("train order is a fresh permutation each epoch") {
    MemorySource tsrc;
    const Manifest tm = memory_manifest(tsrc, 60, Split::kTrain);
    auto order = [&](std::size_t epoch) {
      BatchOptions o;
      o.batch_size = 16;
      o.epoch = epoch;
      o.augment = false;
      BatchStream s(tm, Split::kTrain, tsrc, {}, o);
      std::vector<std::size_t> ids;
      Batch b;
      while (s.next(b)) ids.insert(ids.end(), b.entries.begin(), b.entries.end());
      return ids;
    };
    const auto e1 = order(1), e2 = order(2);
    CHECK(e1 != e2);
    CHECK(std::is_permutation(e1.begin(), e1.end(), e2.begin()));
    CHECK(order(1) == e1);
  }

  SUBCASE("augmented train batches are reproducible") {
    MemorySource tsrc;
    const Manifest tm = memory_manifest(tsrc, 8, Split::kTrain);
    const std::vector<Waveform> pool = {white_noise(2.0, 0.5, 1)};
    auto features = [&]() {
      BatchOptions o;
      o.batch_size = 8;
      BatchStream s(tm, Split::kTrain, tsrc, pool, o);
      Batch b;
      REQUIRE(s.next(b));
      return std::vector<float>(b.features.data().begin(), b.features.data().end());
    };
    CHECK(features() == features());
  }

  SUBCASE("unreadable files are skipped up to the limit") {
    Manifest broken = m;
    broken.entries[3].path = "missing.wav";
    BatchStream ok(broken, Split::kTest, src, {}, BatchOptions{});
    Batch b;
    std::size_t total = 0;
    while (ok.next(b)) total += b.size();
    CHECK(total == 129);
    CHECK(ok.skipped() == 1);

    broken.entries[4].path = "missing.wav";
    broken.entries[5].path = "missing.wav";
    BatchStream bad(broken, Split::kTest, src, {}, BatchOptions{});
    CHECK_THROWS_AS(while (bad.next(b)) {}, DataError);
  }
}

namespace {

// Serves from a wrapped source until switched off.
class Switchable : public ExampleSource {
 public:
  explicit Switchable(const ExampleSource& inner) : inner_(inner) {}
  Waveform load(const ManifestEntry& e) const override {
    if (!on) throw DataError("source disabled");
    return inner_.load(e);
  }
  bool on = true;

 private:
  const ExampleSource& inner_;
};

}  // namespace

TEST_CASE("validation features are cached on disk") {
  MemorySource src;
  const Manifest m = memory_manifest(src, 20, Split::kVal);
  Switchable sw(src);
  BatchOptions o;
  o.cache_dir = temp_dir("cache");
  std::vector<float> first;
  {
    BatchStream s(m, Split::kVal, sw, {}, o);
    Batch b;
    REQUIRE(s.next(b));
    first.assign(b.features.data().begin(), b.features.data().end());
  }
  CHECK(std::distance(fs::directory_iterator(o.cache_dir), fs::directory_iterator{}) == 1);
  sw.on = false;
  BatchStream cached(m, Split::kVal, sw, {}, o);
  Batch b;
  REQUIRE(cached.next(b));
  CHECK(std::equal(first.begin(), first.end(), b.features.data().begin()));
  CHECK(feature_cache_key(m, Split::kVal, MfccConfig{}) != feature_cache_key(m, Split::kTest, MfccConfig{}));
  fs::remove_all(o.cache_dir);
}
