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

#include "kwm/error.hpp"
#include "kwm/harness.hpp"

namespace kwm {

AblationAxis parse_ablation_axis(const std::string& text) {
  if (text == "patch") return AblationAxis::kPatch;
  if (text == "token_pos") return AblationAxis::kTokenPos;
  if (text == "directionality") return AblationAxis::kDirectionality;
  throw ConfigError("unknown ablation axis '" + text +
                    "' (expected patch, token_pos or directionality)");
}

std::string to_string(AblationAxis a) {
  switch (a) {
    case AblationAxis::kPatch: return "patch";
    case AblationAxis::kTokenPos: return "token_pos";
    case AblationAxis::kDirectionality: return "directionality";
  }
  return "?";
}

std::vector<std::pair<std::size_t, std::size_t>> default_patch_shapes() {
  // Time-only, frequency-only, then rectangular shapes that tile 40 x 98.
  return {{40, 1}, {1, 98}, {40, 2}, {20, 2}, {8, 7}, {4, 14}};
}

std::vector<AblationCell> ablation_cells(
    AblationAxis axis, const ModelConfig& base,
    const std::vector<std::pair<std::size_t, std::size_t>>& patch_shapes) {
  std::vector<AblationCell> cells;
  switch (axis) {
    case AblationAxis::kPatch:
      for (auto [f, t] : patch_shapes.empty() ? default_patch_shapes() : patch_shapes) {
        ModelConfig c = base;
        c.patch_f = f;
        c.patch_t = t;
        cells.push_back({"patch " + std::to_string(f) + "x" + std::to_string(t), c});
      }
      break;
    case AblationAxis::kTokenPos:
      for (TokenPosition p : {TokenPosition::kMid, TokenPosition::kHead, TokenPosition::kEnd}) {
        ModelConfig c = base;
        c.token_pos = p;
        cells.push_back({"token " + std::string(to_string(p)), c});
      }
      break;
    case AblationAxis::kDirectionality:
      for (Directionality d : {Directionality::kBiBi, Directionality::kFoBi, Directionality::kFoFo}) {
        ModelConfig c = base;
        c.mode = d;
        cells.push_back({"mode " + std::string(to_string(d)), c});
      }
      break;
  }
  for (const auto& cell : cells) cell.config.validate();
  return cells;
}

std::vector<RunReport> ablate(AblationAxis axis, const ModelConfig& base, const TrainConfig& cfg,
                              Dataset& data, const TrainOptions& options,
                              const std::vector<std::pair<std::size_t, std::size_t>>& patch_shapes) {
  std::vector<RunReport> reports;
  std::size_t k = 0;
  for (const auto& cell : ablation_cells(axis, base, patch_shapes)) {
    TrainOptions o = options;
    if (!options.out_dir.empty()) o.out_dir = options.out_dir / ("cell" + std::to_string(k));
    ++k;
    RunReport r = train(cell.config, cfg, data, o);
    r.label = cell.label;
    reports.push_back(std::move(r));
  }
  return reports;
}

}  // namespace kwm
