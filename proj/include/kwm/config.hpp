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

// Flat "key = value" configuration text. '#' starts a comment; blank lines
// are ignored; keys keep their first-seen order when formatted back.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace kwm {

class KeyValues {
 public:
  static KeyValues parse(const std::string& text);
  static KeyValues load(const std::filesystem::path& path);

  std::string format() const;

  bool has(const std::string& key) const;
  void set(const std::string& key, std::string value);
  // Throws ConfigError if missing.
  const std::string& get(const std::string& key) const;

  std::string get_or(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const {
    return entries_;
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

// 64-bit FNV-1a, used for stable split hashing and cache keys.
std::uint64_t fnv1a64(const std::string& text,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);

}  // namespace kwm
