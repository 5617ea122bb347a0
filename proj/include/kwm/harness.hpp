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

// Training and evaluation: AdamW with warmup + cosine schedule, label-smoothed
// cross-entropy, best-validation checkpointing, multi-run averaging and the
// ablation sweeps.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "kwm/config.hpp"
#include "kwm/data.hpp"
#include "kwm/model.hpp"
#include "kwm/tensor.hpp"

namespace kwm {

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch = 128;
  double lr0 = 1e-3;
  double warmup_epochs = 10;
  double weight_decay = 0.1;
  double label_smoothing = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_clip = 0.0;  // global-norm clip; 0 disables
  std::uint64_t seed = 0;
  std::size_t runs = 3;
  std::size_t max_steps = 0;      // stop early after this many steps; 0 = no cap
  bool augment = true;
  bool track_train_accuracy = false;  // evaluate the train split after each epoch

  void validate() const;
  KeyValues to_kv() const;
  static TrainConfig from_kv(const KeyValues& kv);
};

// Linear warmup from 0 over warmup_epochs * steps_per_epoch steps, then
// half-cosine decay to 0 at epochs * steps_per_epoch.
double lr_schedule(std::size_t step, std::size_t steps_per_epoch, const TrainConfig& cfg);

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  double grad_clip = 0.0;
};

// Decoupled weight decay applied only to parameters flagged `decay`.
class AdamW {
 public:
  AdamW(const ParameterList& params, AdamWConfig config);

  // Throws NumericDomainError naming the first parameter with a NaN or
  // infinite gradient; parameters are untouched in that case.
  void step(double lr);
  void zero_grad();
  std::size_t steps() const { return t_; }

 private:
  ParameterList params_;  // shares storage with the caller's tensors
  AdamWConfig config_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

using BatchFn = std::function<bool(const Batch&)>;

// Labeled MFCC batches for one split.
class Dataset {
 public:
  virtual ~Dataset() = default;
  virtual std::size_t num_classes() const = 0;
  virtual std::size_t size(Split s) const = 0;
  // Train batches depend on (seed, epoch); val/test batches never do.
  // Iteration stops early when `fn` returns false.
  virtual void for_each_batch(Split s, std::size_t batch_size, std::uint64_t seed,
                              std::size_t epoch, bool augment, const BatchFn& fn) = 0;
};

// Fixed feature matrices held in memory (no augmentation).
class TensorDataset : public Dataset {
 public:
  explicit TensorDataset(std::size_t num_classes) : num_classes_(num_classes) {}
  // features: [F, T]
  void add(Split s, const Tensor& features, int label);
  std::size_t num_classes() const override { return num_classes_; }
  std::size_t size(Split s) const override;
  void for_each_batch(Split s, std::size_t batch_size, std::uint64_t seed, std::size_t epoch,
                      bool augment, const BatchFn& fn) override;

 private:
  struct Item {
    Split split;
    std::vector<float> values;
    Shape shape;
    int label;
  };
  std::size_t num_classes_;
  std::vector<Item> items_;
};

// A manifest over an example source, featurized through BatchStream.
class ManifestDataset : public Dataset {
 public:
  ManifestDataset(Manifest manifest, const ExampleSource& source,
                  std::vector<Waveform> noise_pool, BatchOptions base = {});
  std::size_t num_classes() const override { return manifest_.task.size(); }
  std::size_t size(Split s) const override { return manifest_.indices(s).size(); }
  void for_each_batch(Split s, std::size_t batch_size, std::uint64_t seed, std::size_t epoch,
                      bool augment, const BatchFn& fn) override;
  const Manifest& manifest() const { return manifest_; }

 private:
  Manifest manifest_;
  const ExampleSource& source_;
  std::vector<Waveform> noise_pool_;
  BatchOptions base_;
};

struct RunReport {
  std::vector<double> train_loss;      // mean per epoch
  std::vector<double> val_accuracy;    // per epoch; empty without a val split
  std::vector<double> train_accuracy;  // per epoch when tracked
  std::vector<double> step_loss;       // every optimizer step
  double test_accuracy = 0.0;
  std::vector<double> run_test_accuracy;  // one per run when averaged
  std::size_t best_epoch = 0;
  std::size_t steps = 0;
  std::size_t param_count = 0;
  double wall_seconds = 0.0;
  std::string config_hash;
  std::string label;  // ablation cell name, if any

  std::string to_json() const;
  void write_epoch_csv(std::ostream& out) const;
  void save(const std::filesystem::path& dir, const std::string& stem = "report") const;
};

using LogitFn = std::function<Tensor(const Batch&)>;

// 100 * correct / total over argmax logits. Throws UsageError on an empty split.
double evaluate(const LogitFn& logits, Dataset& data, Split s, std::size_t batch_size = 128);
double evaluate(const KwmModel& model, Dataset& data, Split s, std::size_t batch_size = 128);

std::string config_hash(const ModelConfig& model_cfg, const TrainConfig& train_cfg);

struct TrainOptions {
  std::filesystem::path out_dir;  // checkpoint + reports; empty keeps everything in memory
  bool verbose = false;
};

// One run with the given seed. The best-validation parameters are restored
// before the test evaluation. A NaN loss throws NumericDomainError; the best
// checkpoint on disk is kept.
RunReport train_run(KwmModel& model, const TrainConfig& cfg, Dataset& data,
                    const TrainOptions& options = {});

// cfg.runs independent runs (model and data seeds derived per run) with
// curves and test accuracy averaged.
RunReport train(const ModelConfig& model_cfg, const TrainConfig& cfg, Dataset& data,
                const TrainOptions& options = {});

enum class AblationAxis { kPatch, kTokenPos, kDirectionality };
AblationAxis parse_ablation_axis(const std::string& text);
std::string to_string(AblationAxis a);

struct AblationCell {
  std::string label;
  ModelConfig config;
};

// Validates every cell; a patch shape that does not divide F x T throws
// ConfigError. `patch_shapes` overrides the default patch sweep.
std::vector<AblationCell> ablation_cells(
    AblationAxis axis, const ModelConfig& base,
    const std::vector<std::pair<std::size_t, std::size_t>>& patch_shapes = {});
std::vector<std::pair<std::size_t, std::size_t>> default_patch_shapes();

std::vector<RunReport> ablate(AblationAxis axis, const ModelConfig& base,
                              const TrainConfig& cfg, Dataset& data,
                              const TrainOptions& options = {},
                              const std::vector<std::pair<std::size_t, std::size_t>>& patch_shapes = {});

}  // namespace kwm
