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

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>

#include "json.hpp"
#include "kwm/checkpoint.hpp"
#include "kwm/error.hpp"
#include "kwm/harness.hpp"
#include "kwm/ops.hpp"
#include "kwm/random.hpp"

namespace kwm {

namespace fs = std::filesystem;

void TensorDataset::add(Split s, const Tensor& features, int label) {
  if (features.dim() != 2) throw DimensionError("TensorDataset: features must be [F, T]");
  if (label < 0 || static_cast<std::size_t>(label) >= num_classes_) {
    throw DataError("TensorDataset: label out of range");
  }
  auto v = features.data();
  items_.push_back(Item{s, std::vector<float>(v.begin(), v.end()), features.shape(), label});
}

std::size_t TensorDataset::size(Split s) const {
  std::size_t n = 0;
  for (const auto& it : items_) n += it.split == s;
  return n;
}

void TensorDataset::for_each_batch(Split s, std::size_t batch_size, std::uint64_t seed,
                                   std::size_t epoch, bool, const BatchFn& fn) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < items_.size(); ++i) {
    if (items_[i].split == s) order.push_back(i);
  }
  if (s == Split::kTrain) {
    Rng rng(derive_seed(seed, epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
      std::swap(order[i - 1], order[j]);
    }
  }
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    Batch b;
    const Shape& shape = items_[order[start]].shape;
    std::vector<float> values;
    values.reserve((end - start) * shape_numel(shape));
    for (std::size_t k = start; k < end; ++k) {
      const Item& it = items_[order[k]];
      if (it.shape != shape) throw DimensionError("TensorDataset: mixed feature shapes");
      values.insert(values.end(), it.values.begin(), it.values.end());
      b.labels.push_back(it.label);
      b.entries.push_back(order[k]);
    }
    b.features = Tensor({end - start, shape[0], shape[1]}, std::move(values));
    if (!fn(b)) return;
  }
}

ManifestDataset::ManifestDataset(Manifest manifest, const ExampleSource& source,
                                 std::vector<Waveform> noise_pool, BatchOptions base)
    : manifest_(std::move(manifest)),
      source_(source),
      noise_pool_(std::move(noise_pool)),
      base_(std::move(base)) {}

void ManifestDataset::for_each_batch(Split s, std::size_t batch_size, std::uint64_t seed,
                                     std::size_t epoch, bool augment, const BatchFn& fn) {
  BatchOptions opts = base_;
  opts.batch_size = batch_size;
  opts.shuffle_seed = seed;
  opts.epoch = epoch;
  opts.augment = augment;
  opts.augment_config.seed = derive_seed(base_.augment_config.seed, seed);
  BatchStream stream(manifest_, s, source_, noise_pool_, opts);
  Batch b;
  while (stream.next(b)) {
    if (!fn(b)) return;
  }
}

double evaluate(const LogitFn& logits, Dataset& data, Split s, std::size_t batch_size) {
  if (data.size(s) == 0) throw UsageError("evaluate: split " + to_string(s) + " is empty");
  NoGradGuard no_grad;
  std::size_t correct = 0, total = 0;
  data.for_each_batch(s, batch_size, 0, 0, false, [&](const Batch& b) {
    const Tensor out = logits(b);
    if (out.dim() != 2 || out.size(0) != b.size()) {
      throw DimensionError("evaluate: logits must be [B, C], got " + shape_str(out.shape()));
    }
    const std::size_t C = out.size(1);
    auto v = out.data();
    for (std::size_t i = 0; i < b.size(); ++i) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < C; ++c) {
        if (v[i * C + c] > v[i * C + best]) best = c;
      }
      correct += static_cast<int>(best) == b.labels[i];
    }
    total += b.size();
    return true;
  });
  if (total == 0) throw UsageError("evaluate: split " + to_string(s) + " yielded no examples");
  return 100.0 * static_cast<double>(correct) / static_cast<double>(total);
}

double evaluate(const KwmModel& model, Dataset& data, Split s, std::size_t batch_size) {
  return evaluate([&model](const Batch& b) { return model.classify(b.features); }, data, s,
                  batch_size);
}

std::string config_hash(const ModelConfig& model_cfg, const TrainConfig& train_cfg) {
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(
                    fnv1a64(model_cfg.to_kv().format() + train_cfg.to_kv().format())));
  return hex;
}

std::string RunReport::to_json() const {
  nlohmann::json j;
  j["label"] = label;
  j["train_loss"] = train_loss;
  j["val_accuracy"] = val_accuracy;
  j["train_accuracy"] = train_accuracy;
  j["test_accuracy"] = test_accuracy;
  j["run_test_accuracy"] = run_test_accuracy;
  j["best_epoch"] = best_epoch;
  j["steps"] = steps;
  j["param_count"] = param_count;
  j["wall_seconds"] = wall_seconds;
  j["config_hash"] = config_hash;
  return j.dump(2);
}

void RunReport::write_epoch_csv(std::ostream& out) const {
  out << "epoch,train_loss,val_accuracy,train_accuracy\n";
  out.precision(9);
  for (std::size_t e = 0; e < train_loss.size(); ++e) {
    out << e << ',' << train_loss[e] << ',';
    if (e < val_accuracy.size()) out << val_accuracy[e];
    out << ',';
    if (e < train_accuracy.size()) out << train_accuracy[e];
    out << '\n';
  }
}

void RunReport::save(const fs::path& dir, const std::string& stem) const {
  fs::create_directories(dir);
  std::ofstream(dir / (stem + ".json")) << to_json() << '\n';
  std::ofstream csv(dir / (stem + "_epochs.csv"));
  write_epoch_csv(csv);
}

RunReport train_run(KwmModel& model, const TrainConfig& cfg, Dataset& data,
                    const TrainOptions& options) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  const std::size_t n_train = data.size(Split::kTrain);
  if (n_train == 0) throw UsageError("train: the train split is empty");
  if (model.config().num_classes != data.num_classes()) {
    throw ConfigError("train: model has " + std::to_string(model.config().num_classes) +
                      " classes, data has " + std::to_string(data.num_classes()));
  }
  const std::size_t steps_per_epoch = (n_train + cfg.batch - 1) / cfg.batch;
  const bool has_val = data.size(Split::kVal) > 0;

  AdamW opt(model.parameters(),
            AdamWConfig{cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay, cfg.grad_clip});
  RunReport report;
  report.param_count = model.parameters().element_count();
  report.config_hash = config_hash(model.config(), cfg);

  double best_val = -1.0;
  auto best = model.snapshot();
  std::size_t step = 0;
  bool stop = false;
  const std::uint64_t shuffle_seed = derive_seed(cfg.seed, 1);
  for (std::size_t epoch = 0; epoch < cfg.epochs && !stop; ++epoch) {
    double loss_sum = 0.0;
    std::size_t batches = 0;
    data.for_each_batch(Split::kTrain, cfg.batch, shuffle_seed, epoch, cfg.augment,
                        [&](const Batch& b) {
      opt.zero_grad();
      const Tensor logits = model.classify(b.features);
      const Tensor loss = cross_entropy_label_smoothed(logits, b.labels,
                                                       static_cast<float>(cfg.label_smoothing));
      const float value = loss.item();
      if (!std::isfinite(value)) {
        throw NumericDomainError("train: loss diverged at step " + std::to_string(step));
      }
      backward(loss);
      opt.step(lr_schedule(step, steps_per_epoch, cfg));
      ++step;
      report.step_loss.push_back(value);
      loss_sum += value;
      ++batches;
      if (cfg.max_steps && step >= cfg.max_steps) stop = true;
      return !stop;
    });
    report.train_loss.push_back(batches ? loss_sum / static_cast<double>(batches) : 0.0);
    if (cfg.track_train_accuracy) {
      report.train_accuracy.push_back(evaluate(model, data, Split::kTrain, cfg.batch));
    }
    if (has_val) {
      const double acc = evaluate(model, data, Split::kVal, cfg.batch);
      report.val_accuracy.push_back(acc);
      if (acc > best_val) {
        best_val = acc;
        report.best_epoch = epoch;
        best = model.snapshot();
        if (!options.out_dir.empty()) {
          fs::create_directories(options.out_dir);
          save_checkpoint(model, options.out_dir / "best.ckpt");
        }
      }
    }
    if (options.verbose) {
      std::cerr << "epoch " << epoch << " step " << step << " loss " << report.train_loss.back();
      if (!report.train_accuracy.empty()) std::cerr << " train_acc " << report.train_accuracy.back();
      if (has_val) std::cerr << " val_acc " << report.val_accuracy.back();
      std::cerr << '\n';
    }
  }
  report.steps = step;
  if (has_val) {
    model.restore(best);
  } else {
    report.best_epoch = report.train_loss.empty() ? 0 : report.train_loss.size() - 1;
    if (!options.out_dir.empty()) {
      fs::create_directories(options.out_dir);
      save_checkpoint(model, options.out_dir / "best.ckpt");
    }
  }
  report.test_accuracy = data.size(Split::kTest) > 0
                             ? evaluate(model, data, Split::kTest, cfg.batch)
                             : std::numeric_limits<double>::quiet_NaN();
  report.run_test_accuracy = {report.test_accuracy};
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  if (!options.out_dir.empty()) report.save(options.out_dir);
  return report;
}

namespace {

void accumulate(std::vector<double>& sum, const std::vector<double>& x) {
  if (sum.size() < x.size()) sum.resize(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) sum[i] += x[i];
}

void divide(std::vector<double>& v, double n) {
  for (double& x : v) x /= n;
}

}  // namespace

RunReport train(const ModelConfig& model_cfg, const TrainConfig& cfg, Dataset& data,
                const TrainOptions& options) {
  cfg.validate();
  if (cfg.runs == 1) {
    KwmModel model(model_cfg);
    return train_run(model, cfg, data, options);
  }
  RunReport avg;
  avg.run_test_accuracy.clear();
  for (std::size_t r = 0; r < cfg.runs; ++r) {
    ModelConfig mc = model_cfg;
    mc.seed = model_cfg.seed + r;
    TrainConfig tc = cfg;
    tc.seed = cfg.seed + r;
    TrainOptions ro = options;
    if (!options.out_dir.empty()) ro.out_dir = options.out_dir / ("run" + std::to_string(r));
    KwmModel model(mc);
    RunReport rep = train_run(model, tc, data, ro);
    accumulate(avg.train_loss, rep.train_loss);
    accumulate(avg.val_accuracy, rep.val_accuracy);
    accumulate(avg.train_accuracy, rep.train_accuracy);
    accumulate(avg.step_loss, rep.step_loss);
    avg.test_accuracy += rep.test_accuracy;
    avg.run_test_accuracy.push_back(rep.test_accuracy);
    avg.steps = rep.steps;
    avg.param_count = rep.param_count;
    avg.wall_seconds += rep.wall_seconds;
  }
  const auto n = static_cast<double>(cfg.runs);
  divide(avg.train_loss, n);
  divide(avg.val_accuracy, n);
  divide(avg.train_accuracy, n);
  divide(avg.step_loss, n);
  avg.test_accuracy /= n;
  avg.config_hash = config_hash(model_cfg, cfg);
  if (!options.out_dir.empty()) avg.save(options.out_dir);
  return avg;
}

}  // namespace kwm
