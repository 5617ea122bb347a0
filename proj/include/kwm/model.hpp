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

// Keyword Mamba: MFCC patches -> linear projection -> class token splice ->
// positional embedding -> stack of BiMamba (KWM) or BiMamba + FFN (KWM-T)
// layers -> norm of the class token -> linear head.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kwm/bimamba.hpp"
#include "kwm/config.hpp"
#include "kwm/tensor.hpp"

namespace kwm {

enum class Variant { kKwm, kKwmT };
enum class TokenPosition { kMid, kHead, kEnd };

std::string_view to_string(Variant v);
std::string_view to_string(TokenPosition p);
Variant parse_variant(std::string_view text);
TokenPosition parse_token_position(std::string_view text);

struct ModelConfig {
  std::size_t dim = 192;
  std::size_t layers = 12;
  Variant variant = Variant::kKwm;
  Directionality mode = Directionality::kBiBi;
  std::size_t num_classes = 12;
  std::size_t n_mels = 40;   // F
  std::size_t frames = 98;   // T
  std::size_t patch_f = 40;  // f
  std::size_t patch_t = 1;   // t
  std::size_t ffn_dim = 0;   // 0 selects 2 * dim
  TokenPosition token_pos = TokenPosition::kMid;
  std::size_t state = 16;
  std::size_t conv_width = 4;
  std::size_t expand = 2;
  std::size_t dt_rank = 0;  // 0 selects ceil(dim / 16)
  bool use_d_skip = true;
  bool fo_bi_shared_conv = true;
  // Adds a second residual around every (already residual) layer.
  bool double_residual = false;
  std::uint64_t seed = 0;

  std::size_t num_patches() const { return (n_mels / patch_f) * (frames / patch_t); }
  std::size_t seq_len() const { return num_patches() + 1; }
  std::size_t token_index() const;
  std::size_t ffn() const { return ffn_dim ? ffn_dim : 2 * dim; }
  BlockConfig block() const;
  // Throws ConfigError (e.g. patch shape that does not divide F x T).
  void validate() const;

  KeyValues to_kv() const;
  // Missing keys keep their defaults.
  static ModelConfig from_kv(const KeyValues& kv);
};

struct FeedForward {
  Tensor norm_gain, norm_bias;  // [D]
  Tensor w1, b1;                // [D, Df], [Df]
  Tensor w2, b2;                // [Df, D], [D]
};

struct EncoderLayer {
  BiMambaBlock mixer;
  std::optional<FeedForward> ffn;  // KWM-T only
};

class KwmModel {
 public:
  explicit KwmModel(const ModelConfig& config);
  KwmModel(KwmModel&&) = default;
  KwmModel& operator=(KwmModel&&) = default;
  KwmModel(const KwmModel&) = delete;
  KwmModel& operator=(const KwmModel&) = delete;

  const ModelConfig& config() const { return config_; }
  const ParameterList& parameters() const { return params_; }

  // [B, F, T] -> [B, N_p + 1, D]; a single [F, T] matrix gives [N_p + 1, D].
  Tensor embed(const Tensor& mfcc) const;
  Tensor encoder_forward(const Tensor& x0) const;
  // [B, F, T] -> logits [B, num_classes]
  Tensor classify(const Tensor& mfcc_batch) const;

  // Copies of every parameter's values, in parameters() order.
  std::vector<std::vector<float>> snapshot() const;
  void restore(const std::vector<std::vector<float>>& values);

  Tensor patch_weight;   // [f * t, D]
  Tensor class_token;    // [1, D]
  Tensor pos_embedding;  // [N_p + 1, D]
  std::vector<EncoderLayer> layers;
  Tensor final_gain, final_bias;  // [D]
  Tensor head_weight;             // [D, C]
  Tensor head_bias;               // [C]

 private:
  ModelConfig config_;
  ParameterList params_;
};

// Flat index (into a row-major [F, T] matrix) of every patch element, in
// patch order: time-major across patches, frequency-fastest inside a patch.
std::vector<std::size_t> patch_indices(const ModelConfig& config);

// Closed-form parameter count; equals KwmModel(config).parameters()
// element count without building the model.
std::size_t count_params(const ModelConfig& config);

}  // namespace kwm
