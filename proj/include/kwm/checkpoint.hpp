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

// Checkpoint layout (all integers little-endian):
//
//   "KWMCKPT1"                          8-byte magic
//   u32 config_len, config_len bytes    ModelConfig as "key = value" lines
//   u32 tensor_count
//   tensor_count x manifest entry:
//     u32 name_len, name bytes
//     u8  dtype (0 = float32)
//     u8  rank, rank x u32 dims
//   payloads: raw float32 little-endian, in manifest order

#include <filesystem>

#include "kwm/model.hpp"

namespace kwm {

void save_checkpoint(const KwmModel& model, const std::filesystem::path& path);

// Rebuilds the model from the embedded config and loads its values.
KwmModel load_checkpoint(const std::filesystem::path& path);

// Loads values into an existing model. Every name and shape must match;
// throws FormatError otherwise.
void load_checkpoint_into(KwmModel& model, const std::filesystem::path& path);

// Reads only the embedded config.
ModelConfig read_checkpoint_config(const std::filesystem::path& path);

}  // namespace kwm
