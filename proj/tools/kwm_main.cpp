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

// kwm: command-line front end for training, evaluation, feature dumps,
// parameter counts and ablation sweeps.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "kwm/checkpoint.hpp"
#include "kwm/data.hpp"
#include "kwm/error.hpp"
#include "kwm/features.hpp"
#include "kwm/harness.hpp"
#include "kwm/model.hpp"

namespace fs = std::filesystem;
using namespace kwm;

namespace {

struct DataConfig {
  TaskName task = TaskName::kV1_12;
  ManifestOptions manifest;
  AugmentConfig augment;
};

DataConfig data_from_kv(const KeyValues& kv) {
  DataConfig d;
  d.task = parse_task_name(kv.get_or("task", "V1-12"));
  d.manifest.seed = static_cast<std::uint64_t>(kv.get_int("data_seed", 0));
  d.manifest.use_list_files = kv.get_bool("use_list_files", false);
  d.manifest.balance_unknown = kv.get_bool("balance_unknown", true);
  AugmentConfig& a = d.augment;
  a.shift_ms_min = kv.get_double("shift_ms_min", a.shift_ms_min);
  a.shift_ms_max = kv.get_double("shift_ms_max", a.shift_ms_max);
  a.resample_min = kv.get_double("resample_min", a.resample_min);
  a.resample_max = kv.get_double("resample_max", a.resample_max);
  a.noise_volume = kv.get_double("noise_volume", a.noise_volume);
  a.noise_prob = kv.get_double("noise_prob", a.noise_prob);
  a.n_time_masks = static_cast<std::size_t>(kv.get_int("n_time_masks", 2));
  a.time_mask_max = static_cast<std::size_t>(kv.get_int("time_mask_max", 25));
  a.n_freq_masks = static_cast<std::size_t>(kv.get_int("n_freq_masks", 2));
  a.freq_mask_max = static_cast<std::size_t>(kv.get_int("freq_mask_max", 7));
  a.seed = static_cast<std::uint64_t>(kv.get_int("augment_seed", 0));
  a.validate();
  return d;
}

std::vector<std::pair<std::size_t, std::size_t>> parse_patch_shapes(const std::string& text) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto x = item.find('x');
    if (x == std::string::npos) throw ConfigError("patch shape '" + item + "' is not FxT");
    out.emplace_back(std::stoul(item.substr(0, x)), std::stoul(item.substr(x + 1)));
  }
  return out;
}

struct Loaded {
  Manifest manifest;
  std::unique_ptr<DirectorySource> source;
  std::vector<Waveform> noise;
};

Loaded load_data(const fs::path& root, const DataConfig& d, bool need_noise) {
  Loaded l;
  l.manifest = build_manifest(root, make_task(d.task, root), d.manifest);
  l.source = std::make_unique<DirectorySource>(root);
  if (need_noise && d.augment.noise_prob > 0.0) l.noise = load_noise_pool(root, Split::kTrain);
  return l;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Keyword spotting with bidirectional selective state-space models"};
  app.require_subcommand(1);

  fs::path config_path, data_dir, out_dir, ckpt, wav, csv, cache_dir;
  std::string split = "test", axis;
  bool verbose = false;

  auto* train = app.add_subcommand("train", "Train a model (runs are averaged)");
  train->add_option("--config", config_path, "key = value config file")->required()->check(CLI::ExistingFile);
  train->add_option("--data", data_dir, "Speech Commands root")->required()->check(CLI::ExistingDirectory);
  train->add_option("--out", out_dir, "Output directory")->required();
  train->add_flag("--verbose", verbose, "Per-epoch progress on stderr");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--ckpt", ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", data_dir, "Speech Commands root")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--split", split, "train, val or test");
  eval->add_option("--config", config_path, "Config with task/data keys")->check(CLI::ExistingFile);
  eval->add_option("--cache", cache_dir, "Feature cache directory");

  auto* features = app.add_subcommand("features", "Dump the MFCC matrix of a WAV file as CSV");
  features->add_option("--wav", wav, "Input WAV")->required()->check(CLI::ExistingFile);
  features->add_option("--csv", csv, "Output CSV (40 rows x 98 columns)")->required();

  auto* params = app.add_subcommand("params", "Print the parameter count of a config");
  params->add_option("--config", config_path, "key = value config file")->required()->check(CLI::ExistingFile);

  auto* ablate_cmd = app.add_subcommand("ablate", "Run an ablation sweep");
  ablate_cmd->add_option("--axis", axis, "patch, token_pos or directionality")->required();
  ablate_cmd->add_option("--config", config_path, "Base config")->required()->check(CLI::ExistingFile);
  ablate_cmd->add_option("--data", data_dir, "Speech Commands root (omit to only list cells)");
  ablate_cmd->add_option("--out", out_dir, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*features) {
      const MfccMatrix m = mfcc(load_wav(wav));
      std::ofstream out(csv);
      if (!out) throw Error("cannot write " + csv.string());
      write_mfcc_csv(out, m);
      return 0;
    }

    const KeyValues kv = config_path.empty() ? KeyValues{} : KeyValues::load(config_path);

    if (*params) {
      const ModelConfig mc = ModelConfig::from_kv(kv);
      mc.validate();
      const std::size_t n = count_params(mc);
      std::cout << "variant " << to_string(mc.variant) << " dim " << mc.dim << " layers "
                << mc.layers << " mode " << to_string(mc.mode) << '\n'
                << "parameters " << n << " (" << static_cast<double>(n) / 1e6 << "M)\n";
      return 0;
    }

    if (*train) {
      const ModelConfig mc = ModelConfig::from_kv(kv);
      mc.validate();
      const TrainConfig tc = TrainConfig::from_kv(kv);
      const DataConfig dc = data_from_kv(kv);
      Loaded data = load_data(data_dir, dc, tc.augment);
      fs::create_directories(out_dir);
      std::ofstream(out_dir / "manifest.csv") << [&] {
        std::ostringstream s;
        data.manifest.write_csv(s);
        return s.str();
      }();
      std::ofstream(out_dir / "config.txt") << kv.format();
      BatchOptions bo;
      bo.augment_config = dc.augment;
      bo.cache_dir = out_dir / "cache";
      ManifestDataset ds(data.manifest, *data.source, data.noise, bo);
      const RunReport r = kwm::train(mc, tc, ds, TrainOptions{out_dir, verbose});
      std::cout << "test accuracy " << r.test_accuracy << "% over " << tc.runs << " run(s)\n";
      return 0;
    }

    if (*eval) {
      KwmModel model = load_checkpoint(ckpt);
      const DataConfig dc = data_from_kv(kv);
      Loaded data = load_data(data_dir, dc, false);
      BatchOptions bo;
      bo.cache_dir = cache_dir;
      ManifestDataset ds(data.manifest, *data.source, {}, bo);
      const double acc = evaluate(model, ds, parse_split(split));
      std::cout << split << " accuracy " << acc << "%\n";
      return 0;
    }

    if (*ablate_cmd) {
      const ModelConfig mc = ModelConfig::from_kv(kv);
      const TrainConfig tc = TrainConfig::from_kv(kv);
      const auto shapes = parse_patch_shapes(kv.get_or("ablate_patch_shapes", ""));
      const AblationAxis ax = parse_ablation_axis(axis);
      const auto cells = ablation_cells(ax, mc, shapes);
      if (data_dir.empty()) {
        for (const auto& c : cells) std::cout << c.label << " params " << count_params(c.config) << '\n';
        return 0;
      }
      const DataConfig dc = data_from_kv(kv);
      Loaded data = load_data(data_dir, dc, tc.augment);
      BatchOptions bo;
      bo.augment_config = dc.augment;
      if (!out_dir.empty()) bo.cache_dir = out_dir / "cache";
      ManifestDataset ds(data.manifest, *data.source, data.noise, bo);
      for (const auto& r : kwm::ablate(ax, mc, tc, ds, TrainOptions{out_dir, verbose}, shapes)) {
        std::cout << r.label << " test accuracy " << r.test_accuracy << "%\n";
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "kwm: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
