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

#include "kwm/model.hpp"

#include <cmath>

#include "kwm/error.hpp"
#include "kwm/ops.hpp"
#include "kwm/random.hpp"

namespace kwm {

namespace {

Tensor uniform_param(Shape shape, double bound, Rng& rng) {
  std::vector<float> v(shape_numel(shape));
  for (float& x : v) x = static_cast<float>(rng.uniform(-bound, bound));
  return Tensor(std::move(shape), std::move(v), true);
}

std::string layer_prefix(std::size_t i) {
  return "layers." + std::to_string(i) + ".";
}

}  // namespace

std::string_view to_string(Variant v) {
  return v == Variant::kKwm ? "KWM" : "KWM-T";
}

std::string_view to_string(TokenPosition p) {
  switch (p) {
    case TokenPosition::kMid:
      return "Mid";
    case TokenPosition::kHead:
      return "Head";
    case TokenPosition::kEnd:
      return "End";
  }
  return "?";
}

Variant parse_variant(std::string_view text) {
  if (text == "KWM") return Variant::kKwm;
  if (text == "KWM-T") return Variant::kKwmT;
  throw ConfigError("unknown model variant: " + std::string(text));
}

TokenPosition parse_token_position(std::string_view text) {
  if (text == "Mid") return TokenPosition::kMid;
  if (text == "Head") return TokenPosition::kHead;
  if (text == "End") return TokenPosition::kEnd;
  throw ConfigError("unknown class token position: " + std::string(text));
}

std::size_t ModelConfig::token_index() const {
  switch (token_pos) {
    case TokenPosition::kMid:
      return num_patches() / 2;
    case TokenPosition::kHead:
      return 0;
    case TokenPosition::kEnd:
      return num_patches();
  }
  return 0;
}

BlockConfig ModelConfig::block() const {
  BlockConfig b;
  b.dim = dim;
  b.expand = expand;
  b.state = state;
  b.conv_width = conv_width;
  b.dt_rank = dt_rank;
  b.mode = mode;
  b.use_d_skip = use_d_skip;
  b.fo_bi_shared_conv = fo_bi_shared_conv;
  return b;
}

void ModelConfig::validate() const {
  block().validate();
  if (layers == 0) throw ConfigError("model: need at least one layer");
  if (num_classes < 2) throw ConfigError("model: need at least two classes");
  if (patch_f == 0 || patch_t == 0 || n_mels % patch_f != 0 ||
      frames % patch_t != 0) {
    throw ConfigError("model: patch shape (" + std::to_string(patch_f) + "," +
                      std::to_string(patch_t) + ") does not tile (" +
                      std::to_string(n_mels) + "," + std::to_string(frames) +
                      ")");
  }
}

KeyValues ModelConfig::to_kv() const {
  KeyValues kv;
  kv.set("dim", std::to_string(dim));
  kv.set("layers", std::to_string(layers));
  kv.set("variant", std::string(to_string(variant)));
  kv.set("mode", std::string(to_string(mode)));
  kv.set("num_classes", std::to_string(num_classes));
  kv.set("n_mels", std::to_string(n_mels));
  kv.set("frames", std::to_string(frames));
  kv.set("patch_f", std::to_string(patch_f));
  kv.set("patch_t", std::to_string(patch_t));
  kv.set("ffn_dim", std::to_string(ffn()));
  kv.set("class_token_pos", std::string(to_string(token_pos)));
  kv.set("state_dim", std::to_string(state));
  kv.set("conv_width", std::to_string(conv_width));
  kv.set("expand", std::to_string(expand));
  kv.set("dt_rank", std::to_string(block().rank()));
  kv.set("d_skip", use_d_skip ? "true" : "false");
  kv.set("fo_bi_shared_conv", fo_bi_shared_conv ? "true" : "false");
  kv.set("double_residual", double_residual ? "true" : "false");
  kv.set("model_seed", std::to_string(seed));
  return kv;
}

ModelConfig ModelConfig::from_kv(const KeyValues& kv) {
  ModelConfig c;
  auto size = [&](const char* key, std::size_t fallback) {
    const std::int64_t v = kv.get_int(key, static_cast<std::int64_t>(fallback));
    if (v < 0) throw ConfigError(std::string("config key ") + key + " must be >= 0");
    return static_cast<std::size_t>(v);
  };
  c.dim = size("dim", c.dim);
  c.layers = size("layers", c.layers);
  c.variant = parse_variant(kv.get_or("variant", "KWM"));
  c.mode = parse_directionality(kv.get_or("mode", "Bi-Bi"));
  c.num_classes = size("num_classes", c.num_classes);
  c.n_mels = size("n_mels", c.n_mels);
  c.frames = size("frames", c.frames);
  c.patch_f = size("patch_f", c.patch_f);
  c.patch_t = size("patch_t", c.patch_t);
  c.ffn_dim = size("ffn_dim", c.ffn_dim);
  c.token_pos = parse_token_position(kv.get_or("class_token_pos", "Mid"));
  c.state = size("state_dim", c.state);
  c.conv_width = size("conv_width", c.conv_width);
  c.expand = size("expand", c.expand);
  c.dt_rank = size("dt_rank", c.dt_rank);
  c.use_d_skip = kv.get_bool("d_skip", c.use_d_skip);
  c.fo_bi_shared_conv = kv.get_bool("fo_bi_shared_conv", c.fo_bi_shared_conv);
  c.double_residual = kv.get_bool("double_residual", c.double_residual);
  c.seed = static_cast<std::uint64_t>(kv.get_int("model_seed", 0));
  return c;
}

std::vector<std::size_t> patch_indices(const ModelConfig& c) {
  const std::size_t F = c.n_mels, T = c.frames, f = c.patch_f, t = c.patch_t;
  const std::size_t freq_patches = F / f, time_patches = T / t;
  std::vector<std::size_t> idx;
  idx.reserve(F * T);
  for (std::size_t pt = 0; pt < time_patches; ++pt) {
    for (std::size_t pf = 0; pf < freq_patches; ++pf) {
      for (std::size_t dt = 0; dt < t; ++dt) {
        for (std::size_t df = 0; df < f; ++df) {
          idx.push_back((pf * f + df) * T + pt * t + dt);
        }
      }
    }
  }
  return idx;
}

KwmModel::KwmModel(const ModelConfig& config) : config_(config) {
  config_.validate();
  const std::size_t D = config_.dim;
  const std::size_t patch = config_.patch_f * config_.patch_t;
  Rng rng(config_.seed);

  patch_weight = uniform_param({patch, D}, 1.0 / std::sqrt(static_cast<double>(patch)), rng);
  class_token = uniform_param({1, D}, 0.02, rng);
  pos_embedding = uniform_param({config_.seq_len(), D}, 0.02, rng);
  params_.add("patch_embed.weight", patch_weight, true);
  params_.add("class_token", class_token, false);
  params_.add("pos_embed", pos_embedding, false);

  const BlockConfig block_cfg = config_.block();
  for (std::size_t i = 0; i < config_.layers; ++i) {
    EncoderLayer layer{make_block(block_cfg, derive_seed(config_.seed, i)), {}};
    params_.append(layer.mixer.parameters(layer_prefix(i) + "mixer."));
    if (config_.variant == Variant::kKwmT) {
      const std::size_t Df = config_.ffn();
      Rng ffn_rng(derive_seed(config_.seed, 1000 + i));
      FeedForward ffn;
      ffn.norm_gain = Tensor::full({D}, 1.0f, true);
      ffn.norm_bias = Tensor::full({D}, 0.0f, true);
      ffn.w1 = uniform_param({D, Df}, 1.0 / std::sqrt(static_cast<double>(D)), ffn_rng);
      ffn.b1 = Tensor::full({Df}, 0.0f, true);
      ffn.w2 = uniform_param({Df, D}, 1.0 / std::sqrt(static_cast<double>(Df)), ffn_rng);
      ffn.b2 = Tensor::full({D}, 0.0f, true);
      const std::string p = layer_prefix(i);
      params_.add(p + "ffn_norm.gain", ffn.norm_gain, false);
      params_.add(p + "ffn_norm.bias", ffn.norm_bias, false);
      params_.add(p + "ffn.fc1.weight", ffn.w1, true);
      params_.add(p + "ffn.fc1.bias", ffn.b1, false);
      params_.add(p + "ffn.fc2.weight", ffn.w2, true);
      params_.add(p + "ffn.fc2.bias", ffn.b2, false);
      layer.ffn = std::move(ffn);
    }
    layers.push_back(std::move(layer));
  }

  final_gain = Tensor::full({D}, 1.0f, true);
  final_bias = Tensor::full({D}, 0.0f, true);
  // Zero head: the first forward pass predicts the uniform distribution.
  head_weight = Tensor::full({D, config_.num_classes}, 0.0f, true);
  head_bias = Tensor::full({config_.num_classes}, 0.0f, true);
  params_.add("final_norm.gain", final_gain, false);
  params_.add("final_norm.bias", final_bias, false);
  params_.add("head.weight", head_weight, true);
  params_.add("head.bias", head_bias, false);
}

Tensor KwmModel::embed(const Tensor& mfcc) const {
  const std::size_t F = config_.n_mels, T = config_.frames;
  if (mfcc.dim() == 2) {
    Tensor one = embed(reshape(mfcc, {1, mfcc.size(0), mfcc.size(1)}));
    return reshape(one, {config_.seq_len(), config_.dim});
  }
  if (mfcc.dim() != 3 || mfcc.size(1) != F || mfcc.size(2) != T) {
    throw DimensionError("embed: expected MFCC batch [B," + std::to_string(F) + "," +
                    std::to_string(T) + "], got " + shape_str(mfcc.shape()));
  }
  const std::size_t B = mfcc.size(0), Np = config_.num_patches(),
                    P = config_.patch_f * config_.patch_t;
  const std::vector<std::size_t> per_example = patch_indices(config_);
  std::vector<std::size_t> idx;
  idx.reserve(B * per_example.size());
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t i : per_example) idx.push_back(b * F * T + i);
  }
  const Tensor patches = gather(mfcc, std::move(idx), {B, Np, P});
  const Tensor projected = matmul(patches, patch_weight);

  const std::size_t k = config_.token_index();
  std::vector<Tensor> parts;
  if (k > 0) parts.push_back(slice(projected, 1, 0, k));
  parts.push_back(repeat_leading(class_token, B));
  if (k < Np) parts.push_back(slice(projected, 1, k, Np - k));
  return add(concat(parts, 1), pos_embedding);
}

Tensor KwmModel::encoder_forward(const Tensor& x0) const {
  Tensor x = x0;
  for (const EncoderLayer& layer : layers) {
    Tensor y = bimamba_forward(layer.mixer, x);
    if (layer.ffn) {
      const FeedForward& f = *layer.ffn;
      const Tensor h = gelu(add(matmul(layer_norm(y, f.norm_gain, f.norm_bias), f.w1), f.b1));
      y = add(y, add(matmul(h, f.w2), f.b2));
    }
    if (config_.double_residual) y = add(y, x);
    x = y;
  }
  return x;
}

Tensor KwmModel::classify(const Tensor& mfcc_batch) const {
  const Tensor encoded = encoder_forward(embed(mfcc_batch));
  const std::size_t B = encoded.size(0);
  const Tensor token = reshape(slice(encoded, 1, config_.token_index(), 1),
                               {B, config_.dim});
  const Tensor features = layer_norm(token, final_gain, final_bias);
  return add(matmul(features, head_weight), head_bias);
}

std::vector<std::vector<float>> KwmModel::snapshot() const {
  std::vector<std::vector<float>> out;
  out.reserve(params_.size());
  for (const Parameter& p : params_) {
    out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  }
  return out;
}

void KwmModel::restore(const std::vector<std::vector<float>>& values) {
  if (values.size() != params_.size()) {
    throw UsageError("restore: snapshot has " + std::to_string(values.size()) +
                     " tensors, model has " + std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    Tensor t = params_.items()[i].tensor;
    auto dst = t.mutable_data();
    if (dst.size() != values[i].size()) {
      throw DimensionError("restore: size mismatch for " + params_.items()[i].name);
    }
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

std::size_t count_params(const ModelConfig& c) {
  c.validate();
  const std::size_t D = c.dim;
  std::size_t layer = block_param_count(c.block());
  if (c.variant == Variant::kKwmT) {
    const std::size_t Df = c.ffn();
    layer += 2 * D + D * Df + Df + Df * D + D;
  }
  const std::size_t embedding = c.patch_f * c.patch_t * D + D + c.seq_len() * D;
  const std::size_t head = 2 * D + D * c.num_classes + c.num_classes;
  return embedding + c.layers * layer + head;
}

}  // namespace kwm
