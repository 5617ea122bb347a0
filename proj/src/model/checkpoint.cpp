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

#include "kwm/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "kwm/error.hpp"

namespace kwm {

namespace {

constexpr std::array<char, 8> kMagic = {'K', 'W', 'M', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint8_t kFloat32 = 0;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

class Reader {
 public:
  explicit Reader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

  std::size_t offset() const { return pos_; }

  const char* take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("checkpoint truncated while reading ") + what,
                        static_cast<long long>(pos_));
    }
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::uint8_t u8(const char* what) { return static_cast<std::uint8_t>(*take(1, what)); }

  std::uint32_t u32(const char* what) {
    const auto* p = reinterpret_cast<const unsigned char*>(take(4, what));
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
  }

  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

 private:
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

struct Entry {
  std::string name;
  Shape shape;
  std::size_t name_offset;
};

struct Parsed {
  ModelConfig config;
  std::vector<Entry> entries;
};

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string(), 0);
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

Parsed parse_header(Reader& r) {
  const char* magic = r.take(kMagic.size(), "magic");
  if (std::memcmp(magic, kMagic.data(), kMagic.size()) != 0) {
    throw FormatError("not a KWMCKPT1 checkpoint", 0);
  }
  const std::uint32_t config_len = r.u32("config length");
  const char* text = r.take(config_len, "config");
  Parsed parsed;
  parsed.config = ModelConfig::from_kv(KeyValues::parse(std::string(text, config_len)));
  const std::uint32_t count = r.u32("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    e.name_offset = r.offset();
    const std::uint32_t len = r.u32("name length");
    e.name.assign(r.take(len, "name"), len);
    const std::size_t dtype_at = r.offset();
    if (r.u8("dtype") != kFloat32) {
      throw FormatError("unsupported dtype for " + e.name,
                        static_cast<long long>(dtype_at));
    }
    const std::uint8_t rank = r.u8("rank");
    for (std::uint8_t d = 0; d < rank; ++d) e.shape.push_back(r.u32("dim"));
    parsed.entries.push_back(std::move(e));
  }
  return parsed;
}

void load_payloads(KwmModel& model, Reader& r, const Parsed& parsed) {
  const ParameterList& params = model.parameters();
  if (parsed.entries.size() != params.size()) {
    throw FormatError("checkpoint holds " + std::to_string(parsed.entries.size()) +
                          " tensors, model expects " + std::to_string(params.size()),
                      static_cast<long long>(r.offset()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = params.items()[i];
    const Entry& e = parsed.entries[i];
    if (e.name != p.name || e.shape != p.tensor.shape()) {
      throw FormatError("manifest entry " + e.name + shape_str(e.shape) +
                            " does not match model parameter " + p.name +
                            shape_str(p.tensor.shape()),
                        static_cast<long long>(e.name_offset));
    }
  }
  for (const Parameter& p : params) {
    Tensor t = p.tensor;
    for (float& v : t.mutable_data()) v = r.f32("payload");
  }
}

}  // namespace

void save_checkpoint(const KwmModel& model, const std::filesystem::path& path) {
  std::string out(kMagic.begin(), kMagic.end());
  const std::string config = model.config().to_kv().format();
  put_u32(out, static_cast<std::uint32_t>(config.size()));
  out += config;
  const ParameterList& params = model.parameters();
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const Parameter& p : params) {
    put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    out.push_back(static_cast<char>(kFloat32));
    out.push_back(static_cast<char>(p.tensor.dim()));
    for (std::size_t d : p.tensor.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  }
  for (const Parameter& p : params) {
    for (float v : p.tensor.data()) put_f32(out, v);
  }
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write checkpoint " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw Error("short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

ModelConfig read_checkpoint_config(const std::filesystem::path& path) {
  Reader r(read_file(path));
  return parse_header(r).config;
}

KwmModel load_checkpoint(const std::filesystem::path& path) {
  Reader r(read_file(path));
  Parsed parsed = parse_header(r);
  KwmModel model(parsed.config);
  load_payloads(model, r, parsed);
  return model;
}

void load_checkpoint_into(KwmModel& model, const std::filesystem::path& path) {
  Reader r(read_file(path));
  Parsed parsed = parse_header(r);
  load_payloads(model, r, parsed);
}

}  // namespace kwm
