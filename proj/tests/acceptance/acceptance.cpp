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

// End-to-end acceptance checks. Prints one PASS/FAIL/SKIP/INFO line per
// criterion and exits non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "grad_check.hpp"
#include "kwm/bimamba.hpp"
#include "kwm/data.hpp"
#include "kwm/features.hpp"
#include "kwm/harness.hpp"
#include "kwm/model.hpp"
#include "kwm/ops.hpp"
#include "kwm/simd/kernels.hpp"
#include "kwm/ssm_scan.hpp"

using namespace kwm;
using kwm::testing::random_tensor;

namespace {

enum class Verdict { kPass, kFail, kSkip, kInfo };

struct Outcome {
  Verdict verdict = Verdict::kFail;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;  // 0 means no runtime limit
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Outcome verdict(bool ok, std::string detail) {
  return {ok ? Verdict::kPass : Verdict::kFail, std::move(detail)};
}

// 1. Time-invariant scan against the convolution kernel.
Outcome scan_equivalence() {
  Rng rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto L = static_cast<std::size_t>(rng.uniform_int(1, 64));
    const auto N = static_cast<std::size_t>(rng.uniform_int(1, 16));
    const auto E = static_cast<std::size_t>(rng.uniform_int(1, 8));
    Tensor A = random_tensor({E, N}, rng, -3.0, -0.1, false);
    Tensor dt = random_tensor({E}, rng, 0.01, 0.5, false);
    Tensor b = random_tensor({N}, rng, -1, 1, false);
    Tensor c = random_tensor({N}, rng, -1, 1, false);
    Tensor x = random_tensor({L, E}, rng, -1, 1, false);
    Tensor d = random_tensor({E}, rng, -1, 1, false);

    std::vector<float> delta(L * E), bv(L * N), cv(L * N);
    for (std::size_t t = 0; t < L; ++t) {
      for (std::size_t e = 0; e < E; ++e) delta[t * E + e] = dt[e];
      for (std::size_t n = 0; n < N; ++n) {
        bv[t * N + n] = b[n];
        cv[t * N + n] = c[n];
      }
    }
    ssm::SelectiveInputs in{Tensor({1, L, E}, delta), Tensor({1, L, N}, bv),
                            Tensor({1, L, N}, cv), reshape(x, {1, L, E}), d};
    const Tensor y_scan = ssm::selective_scan_seq(in, A);

    const auto disc = ssm::discretize(A, Tensor({1, 1, E}, std::vector<float>(dt.data().begin(), dt.data().end())),
                                      Tensor({1, 1, N}, std::vector<float>(b.data().begin(), b.data().end())));
    const Tensor y_conv = ssm::ssm_kernel_conv(reshape(disc.A_bar, {E, N}),
                                               reshape(disc.B_bar, {E, N}), c, x, d);
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < L * E; ++i) {
      diff = std::max(diff, std::fabs(double(y_scan[i]) - y_conv[i]));
      scale = std::max(scale, std::fabs(double(y_conv[i])));
    }
    worst = std::max(worst, diff / std::max(scale, 1e-30));
  }
  return verdict(worst < 1e-5, "50 instances, max relative deviation " + fmt("%.3g", worst) +
                                   " (limit 1e-5)");
}

// 2. Small-step limit and the closed-form scalar case.
Outcome discretization_limits() {
  const std::size_t E = 3, N = 4;
  Tensor A = ssm::real_diagonal_init(E, N);
  const double slack = 4.0 * 1.1920929e-7;  // float rounding of A_bar
  double worst_first = 0.0, worst_rich = 0.0;
  bool ok = true;
  auto slopes = [&](double dt) {
    auto d = ssm::discretize(A, Tensor({1, 1, E}, std::vector<float>(E, static_cast<float>(dt))),
                             Tensor({1, 1, N}, std::vector<float>(N, 1.0f)));
    return d.A_bar;
  };
  for (double dt : {1e-1, 1e-2, 1e-3, 1e-4}) {
    const Tensor full = slopes(dt), half = slopes(dt / 2);
    for (std::size_t i = 0; i < E * N; ++i) {
      const double a = A[i], x = dt * a;
      // Ā - (1 + ΔA) is bounded by the second-order remainder.
      const double err = std::fabs(full[i] - (1.0 + x));
      const double bound = 0.5 * x * x + slack;
      worst_first = std::max(worst_first, err / bound);
      ok = ok && err <= bound && std::fabs(full[i] - 1.0) <= std::fabs(x) + slack;
      // Richardson: 2 s(Δ/2) - s(Δ), s = (Ā - 1) / Δ, recovers A to O(Δ²).
      const double s_full = (full[i] - 1.0) / dt, s_half = (half[i] - 1.0) / (dt / 2);
      const double rich = std::fabs(2.0 * s_half - s_full - a);
      const double rich_bound = std::fabs(a * a * a) * dt * dt / 12.0 * 1.01 + 3.0 * slack / dt;
      worst_rich = std::max(worst_rich, rich / rich_bound);
      ok = ok && rich <= rich_bound;
    }
  }
  auto z = ssm::discretize(Tensor({1, 1}, {-1.0f}),
                           Tensor({1, 1, 1}, {static_cast<float>(std::log(2.0))}),
                           Tensor({1, 1, 1}, {1.0f}));
  const double closed = std::fabs(z.A_bar[0] - 0.5);
  ok = ok && closed <= 1e-7;
  return verdict(ok, "first-order remainder at " + fmt("%.3g", worst_first) +
                         " of bound, Richardson at " + fmt("%.3g", worst_rich) +
                         " of bound, |A_bar - 0.5| = " + fmt("%.3g", closed) + " (limit 1e-7)");
}

// 3. Finite-difference gradient suite.
Outcome gradient_suite() {
  constexpr int kInstances = 20;
  double worst = 0.0;
  std::string worst_name;
  std::size_t cases = 0;
  for (const auto& c : testing::gradient_cases()) {
    ++cases;
    for (int s = 1; s <= kInstances; ++s) {
      const double e = c.run(static_cast<std::uint64_t>(s));
      if (!(e <= worst)) {
        worst = e;
        worst_name = c.name;
      }
    }
  }
  return verdict(worst < 1e-3, std::to_string(cases) + " cases x " + std::to_string(kInstances) +
                                   " instances, worst relative error " + fmt("%.3g", worst) +
                                   " (" + worst_name + ", limit 1e-3)");
}

// 4. Parameter counts against the published tables.
Outcome parameter_counts() {
  struct Cell {
    Variant variant;
    std::size_t dim, layers;
    double published;
    double tolerance;
  };
  std::vector<Cell> cells;
  const double kwm[3][4] = {{3.4e6, 2.9e6, 2.3e6, 1.7e6},
                            {1.6e6, 1.4e6, 1.1e6, 0.8e6},
                            {0.5e6, 0.4e6, 0.3e6, 0.2e6}};
  const double kwm_t[3][4] = {{5.2e6, 4.3e6, 3.5e6, 2.6e6},
                              {2.4e6, 2.0e6, 1.6e6, 1.2e6},
                              {0.7e6, 0.6e6, 0.5e6, 0.4e6}};
  const std::size_t dims[3] = {192, 128, 64}, depths[4] = {12, 10, 8, 6};
  for (int d = 0; d < 3; ++d) {
    for (int l = 0; l < 4; ++l) {
      cells.push_back({Variant::kKwm, dims[d], depths[l], kwm[d][l],
                       kwm[d][l] == 0.2e6 ? 0.15 : 0.02});
      cells.push_back({Variant::kKwmT, dims[d], depths[l], kwm_t[d][l], 0.02});
    }
  }
  std::size_t failed = 0;
  std::ostringstream misses;
  for (const Cell& c : cells) {
    ModelConfig mc;
    mc.variant = c.variant;
    mc.dim = c.dim;
    mc.layers = c.layers;
    const double got = static_cast<double>(count_params(mc));
    const double rel = got / c.published - 1.0;
    if (std::fabs(rel) > c.tolerance) {
      misses << (failed++ ? "," : "") << ' ' << to_string(c.variant) << '-' << c.dim << '-' << c.layers << ' '
             << static_cast<long>(got) << " vs " << c.published / 1e6 << "M ("
             << fmt("%+.1f%%", 100.0 * rel) << ')';
    }
  }
  std::string detail = std::to_string(cells.size() - failed) + "/" +
                       std::to_string(cells.size()) + " cells within tolerance";
  if (failed) detail += ", off:" + misses.str();
  return verdict(failed == 0, detail);
}

// 5. Frame count and time-shift covariance of the MFCC front end.
Outcome feature_pipeline() {
  const Waveform w = testing::white_noise(1.0, 0.3, 55);
  const MfccMatrix m = mfcc(w);
  const bool shape_ok = w.samples.size() == 16000 && m.coeffs.shape() == Shape{40, 98} &&
                        m.source_frames == 98;
  Waveform voiced = testing::tone(440.0, 0.6, 0.5);
  const Waveform noise = testing::white_noise(0.6, 0.05, 56);
  for (std::size_t i = 0; i < voiced.samples.size(); ++i) voiced.samples[i] += noise.samples[i];
  const MfccMatrix a = mfcc(voiced);
  double worst = 0.0;
  for (std::size_t k : {1u, 5u, 20u}) {
    Waveform shifted;
    shifted.samples.assign(160 * k, 0.0f);
    shifted.samples.insert(shifted.samples.end(), voiced.samples.begin(), voiced.samples.end());
    const MfccMatrix b = mfcc(shifted);
    for (std::size_t c = 0; c < a.source_frames && c + k < 98; ++c) {
      for (std::size_t r = 0; r < 40; ++r) {
        worst = std::max(worst, std::fabs(double(a.coeffs[r * 98 + c]) - b.coeffs[r * 98 + c + k]));
      }
    }
  }
  return verdict(shape_ok && worst <= 1e-4,
                 "1 s at 16 kHz gives " + shape_str(m.coeffs.shape()) + " (" +
                     std::to_string(m.source_frames) + " frames), shift deviation " +
                     fmt("%.3g", worst) + " (limit 1e-4)");
}

// Largest change at positions before `pos` when only `pos` is perturbed.
double past_change(const BiMambaBlock& block, std::size_t L, std::size_t pos, Rng& rng) {
  const std::size_t D = block.config.dim;
  Tensor x = random_tensor({1, L, D}, rng, -1, 1, false);
  std::vector<float> v(x.data().begin(), x.data().end());
  // Per-feature noise; a uniform shift would be removed by the layer norm.
  for (std::size_t d = 0; d < D; ++d) v[pos * D + d] += static_cast<float>(rng.uniform(-1, 1));
  const Tensor y0 = bimamba_forward(block, x);
  const Tensor y1 = bimamba_forward(block, Tensor(x.shape(), v));
  double worst = 0.0;
  for (std::size_t i = 0; i < pos * D; ++i) worst = std::max(worst, double(std::fabs(y0[i] - y1[i])));
  return worst;
}

// 6. Forward-only blocks ignore the future; bidirectional blocks do not.
Outcome directionality() {
  const std::size_t L = 16, D = 16;
  std::size_t fofo_leaks = 0, bibi_sees = 0, positions = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    BiMambaBlock fofo = make_block(D, Directionality::kFoFo, seed);
    BiMambaBlock bibi = make_block(D, Directionality::kBiBi, seed);
    // The near-zero initial output projection would hide either branch.
    Rng wr(seed + 100);
    for (auto* b : {&fofo, &bibi}) {
      for (float& w : b->w_out.mutable_data()) w = static_cast<float>(wr.uniform(-0.5, 0.5));
    }
    Rng rng(seed);
    for (std::size_t pos = 1; pos < L; ++pos) {
      ++positions;
      if (past_change(fofo, L, pos, rng) != 0.0) ++fofo_leaks;
      if (past_change(bibi, L, pos, rng) > 0.0) ++bibi_sees;
    }
  }
  return verdict(fofo_leaks == 0 && bibi_sees >= 1,
                 "Fo-Fo invariant at " + std::to_string(positions - fofo_leaks) + "/" +
                     std::to_string(positions) + " positions, Bi-Bi sensitive at " +
                     std::to_string(bibi_sees) + "/" + std::to_string(positions));
}

struct SmokeRun {
  RunReport report;
  std::size_t classes = 0;
};

SmokeRun smoke_run() {
  constexpr std::size_t kClasses = 12;
  TensorDataset data = testing::synthetic_dataset(kClasses, 128, 0, 0, 7);
  ModelConfig mc;
  mc.dim = 64;
  mc.layers = 2;
  mc.num_classes = kClasses;
  TrainConfig tc;
  tc.batch = 32;
  tc.epochs = 75;  // 300 steps at 4 steps per epoch
  tc.max_steps = 300;
  tc.warmup_epochs = 5;
  tc.lr0 = 3e-3;
  tc.weight_decay = 0.05;
  tc.augment = false;
  tc.runs = 1;
  tc.track_train_accuracy = true;
  KwmModel model(mc);
  return {train_run(model, tc, data, TrainOptions{}), kClasses};
}

SmokeRun first_smoke;

// 7. Overfitting a fixed set.
Outcome smoke_training() {
  first_smoke = smoke_run();
  const RunReport& r = first_smoke.report;
  const double ln_c = std::log(static_cast<double>(first_smoke.classes));
  const double loss0 = r.step_loss.empty() ? NAN : r.step_loss.front();
  const std::size_t steps_per_epoch = 4;
  std::size_t reached = 0;
  for (std::size_t e = 0; e < r.train_accuracy.size(); ++e) {
    if (r.train_accuracy[e] == 100.0) {
      reached = (e + 1) * steps_per_epoch;
      break;
    }
  }
  const bool ok = std::fabs(loss0 - ln_c) <= 0.1 && reached > 0 && reached <= 300;
  return verdict(ok, "initial loss " + fmt("%.4f", loss0) + " vs ln C " + fmt("%.4f", ln_c) +
                         ", 100% train accuracy " +
                         (reached ? "at step " + std::to_string(reached) : std::string("never")) +
                         " (limit 300)");
}

// 8. Small real subset; needs Speech Commands V2 on disk.
Outcome small_real_training() {
  const char* dir = std::getenv("KWM_V2_DIR");
  if (!dir || !*dir) return {Verdict::kSkip, "set KWM_V2_DIR to a Speech Commands V2 root"};
  const std::filesystem::path root(dir);
  LabelTask task{TaskName::kV2_12, {"yes", "no", kSilenceLabel, kUnknownLabel}};
  ManifestOptions mo;
  mo.use_list_files = std::filesystem::exists(root / "validation_list.txt");
  const Manifest manifest = build_manifest(root, task, mo);
  DirectorySource source(root);
  BatchOptions base;
  base.cache_dir = testing::temp_dir("acceptance-v2");
  ManifestDataset data(manifest, source, load_noise_pool(root, Split::kTrain), base);
  ModelConfig mc;
  mc.dim = 64;
  mc.layers = 6;
  mc.num_classes = task.size();
  TrainConfig tc;
  tc.epochs = 30;
  tc.warmup_epochs = 3;
  tc.runs = 1;
  KwmModel model(mc);
  const RunReport r = train_run(model, tc, data, TrainOptions{});
  std::filesystem::remove_all(base.cache_dir);
  return verdict(r.test_accuracy >= 95.0,
                 "test accuracy " + fmt("%.2f", r.test_accuracy) + "% (limit 95%)");
}

// 9. Full-scale accuracies are out of reach here.
Outcome headline_accuracy() {
  return {Verdict::kInfo,
          "full-scale accuracy needs multi-hour training; launch with `kwm train` "
          "(epochs 200, runs 3)"};
}

// 10. Bit-identical repeat of the smoke run.
Outcome determinism() {
  if (first_smoke.report.step_loss.empty()) return {Verdict::kFail, "smoke run did not produce a curve"};
  const SmokeRun again = smoke_run();
  const auto& a = first_smoke.report.step_loss;
  const auto& b = again.report.step_loss;
  std::size_t first_diff = a.size() == b.size() ? a.size() : std::min(a.size(), b.size());
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
    if (std::memcmp(&a[i], &b[i], sizeof(a[i])) != 0) {
      first_diff = i;
      break;
    }
  }
  const bool ok = a.size() == b.size() && first_diff == a.size();
  return verdict(ok, ok ? std::to_string(a.size()) + " step losses identical"
                        : "curves diverge at step " + std::to_string(first_diff));
}

const char* label(Verdict v) {
  switch (v) {
    case Verdict::kPass: return "PASS";
    case Verdict::kFail: return "FAIL";
    case Verdict::kSkip: return "SKIP";
    case Verdict::kInfo: return "INFO";
  }
  return "?";
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "scan equivalence", 5.0, scan_equivalence},
      {2, "discretization limits", 0.0, discretization_limits},
      {3, "gradient suite", 60.0, gradient_suite},
      {4, "parameter counts", 1.0, parameter_counts},
      {5, "feature pipeline", 5.0, feature_pipeline},
      {6, "directionality causality", 10.0, directionality},
      {7, "smoke training", 600.0, smoke_training},
      {8, "small real training", 7200.0, small_real_training},
      {9, "headline accuracy", 0.0, headline_accuracy},
      {10, "determinism", 0.0, determinism},
  };
  std::printf("kernels: %s\n", std::string(simd::backend_name(simd::active_backend())).c_str());
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {Verdict::kFail, std::string("threw: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string timing = fmt("%.2f s", secs);
    if (c.budget_seconds > 0.0) {
      timing += fmt(" (limit %.0f s)", c.budget_seconds);
      if (out.verdict == Verdict::kPass && secs >= c.budget_seconds) {
        out.verdict = Verdict::kFail;
        out.detail += "; over the time limit";
      }
    }
    if (out.verdict == Verdict::kFail) ++failures;
    std::printf("%s  C%-2d %-26s %s; %s\n", label(out.verdict), c.id, c.name.c_str(),
                out.detail.c_str(), timing.c_str());
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
