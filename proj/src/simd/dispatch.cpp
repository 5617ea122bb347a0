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

#include <atomic>
#include <cstdlib>
#include <string>

#include "kwm/error.hpp"
#include "kwm/simd/kernels.hpp"

namespace kwm::simd {

namespace {

bool cpu_has_avx2() {
#if defined(KWM_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* initial_table() {
  const KernelTable* wide = avx2_kernels();
  const char* forced = std::getenv("KWM_SIMD");
  if (forced != nullptr) {
    std::string name(forced);
    if (name == "scalar") return &base::kTable;
    if (name == "avx2" && wide != nullptr) return wide;
  }
  return wide != nullptr ? wide : &base::kTable;
}

std::atomic<const KernelTable*>& active() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

std::string_view backend_name(Backend backend) {
  switch (backend) {
    case Backend::kScalar:
      return "scalar";
    case Backend::kAvx2:
      return "avx2";
  }
  return "unknown";
}

const KernelTable& kernels() { return *active().load(std::memory_order_acquire); }

const KernelTable& scalar_kernels() { return base::kTable; }

const KernelTable* avx2_kernels() {
#if defined(KWM_HAVE_AVX2)
  static const bool supported = cpu_has_avx2();
  return supported ? avx2::table() : nullptr;
#else
  return nullptr;
#endif
}

Backend active_backend() { return kernels().backend; }

void set_backend(Backend backend) {
  const KernelTable* table =
      backend == Backend::kScalar ? &base::kTable : avx2_kernels();
  if (table == nullptr) {
    throw ConfigError(std::string("SIMD backend unavailable: ") +
                      std::string(backend_name(backend)));
  }
  active().store(table, std::memory_order_release);
}

}  // namespace kwm::simd
