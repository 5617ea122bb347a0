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
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "kwm/error.hpp"
#include "kwm/features.hpp"

namespace kwm {

namespace {

std::uint32_t le32(const std::vector<char>& b, std::size_t at) {
  const auto* p = reinterpret_cast<const unsigned char*>(b.data() + at);
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t le16(const std::vector<char>& b, std::size_t at) {
  const auto* p = reinterpret_cast<const unsigned char*>(b.data() + at);
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void need(const std::vector<char>& b, std::size_t at, std::size_t n,
          const char* what) {
  if (b.size() < at + n) {
    throw FormatError(std::string("truncated WAV: missing ") + what,
                      static_cast<long long>(b.size()));
  }
}

void put(std::string& out, std::uint32_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

}  // namespace

Waveform parse_wav(const std::vector<char>& b) {
  need(b, 0, 12, "RIFF header");
  if (std::memcmp(b.data(), "RIFF", 4) != 0) throw FormatError("missing RIFF tag", 0);
  if (std::memcmp(b.data() + 8, "WAVE", 4) != 0) throw FormatError("missing WAVE tag", 8);

  Waveform wave;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (true) {
    need(b, pos, 8, "chunk header");
    const std::string id(b.data() + pos, 4);
    const std::uint32_t size = le32(b, pos + 4);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      need(b, body, 16, "fmt chunk");
      const std::uint16_t format = le16(b, body);
      const std::uint16_t channels = le16(b, body + 2);
      const std::uint32_t rate = le32(b, body + 4);
      const std::uint16_t bits = le16(b, body + 14);
      if (format != 1) {
        throw FormatError("unsupported WAV encoding " + std::to_string(format) +
                              " (only PCM)",
                          static_cast<long long>(body));
      }
      if (channels != 1) {
        throw FormatError("unsupported channel count " + std::to_string(channels) +
                              " (only mono)",
                          static_cast<long long>(body + 2));
      }
      if (bits != 16) {
        throw FormatError("unsupported sample width " + std::to_string(bits) +
                              " bits (only 16)",
                          static_cast<long long>(body + 14));
      }
      wave.sample_rate = static_cast<int>(rate);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) {
        throw FormatError("data chunk before fmt chunk", static_cast<long long>(pos));
      }
      need(b, body, size, "sample data");
      if (size % 2 != 0) {
        throw FormatError("odd data chunk size", static_cast<long long>(pos + 4));
      }
      wave.samples.resize(size / 2);
      for (std::size_t i = 0; i < wave.samples.size(); ++i) {
        const auto raw = static_cast<std::int16_t>(le16(b, body + 2 * i));
        wave.samples[i] = static_cast<float>(raw) / 32768.0f;
      }
      return wave;
    }
    pos = body + size + (size & 1);
  }
}

Waveform load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string(), 0);
  std::vector<char> bytes(std::istreambuf_iterator<char>(in), {});
  try {
    return parse_wav(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.detail(), e.offset());
  }
}

void write_wav(const std::filesystem::path& path, const Waveform& wave) {
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(wave.samples.size() * 2);
  std::string out = "RIFF";
  put(out, 36 + data_bytes, 4);
  out += "WAVEfmt ";
  put(out, 16, 4);
  put(out, 1, 2);  // PCM
  put(out, 1, 2);  // mono
  put(out, static_cast<std::uint32_t>(wave.sample_rate), 4);
  put(out, static_cast<std::uint32_t>(wave.sample_rate) * 2, 4);
  put(out, 2, 2);
  put(out, 16, 2);
  out += "data";
  put(out, data_bytes, 4);
  for (float s : wave.samples) {
    long v = std::lround(static_cast<double>(s) * 32768.0);
    v = std::clamp(v, -32768L, 32767L);
    put(out, static_cast<std::uint32_t>(static_cast<std::uint16_t>(static_cast<std::int16_t>(v))), 2);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace kwm
