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

#include <stdexcept>
#include <string>

namespace kwm {

// All library failures derive from Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid hyperparameter or model/block configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Bad input data: labels out of range, missing dataset folders, etc.
class DataError : public Error {
 public:
  using Error::Error;
};

// Values outside the domain of an operation (NaN, non-positive step size).
class NumericDomainError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents. Carries the byte offset where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, long long offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        detail_(what),
        offset_(offset) {}
  long long offset() const { return offset_; }
  // Message without the offset suffix.
  const std::string& detail() const { return detail_; }

 private:
  std::string detail_;
  long long offset_;
};

// API misuse, such as calling backward() on a non-scalar.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace kwm
