// Copyright 2026 The regimen-lab Authors
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

// Benchmark harness: a registry of methods, one (setup, iteration) cell at a
// time, resumable sweeps and the aggregate result files.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "regimen/baselines.hpp"
#include "regimen/cohortsim.hpp"
#include "regimen/pipeline.hpp"
#include "regimen/regime.hpp"

namespace regimen::harness {

inline constexpr std::string_view kVersion = "0.1.0";

struct HarnessOptions {
  std::size_t n = 1000;
  /// Simulator rollouts per proposed regime and patient.
  std::size_t rollouts = 1;
  pipeline::PipelineOptions pipeline;
  baselines::QOptions q;
  baselines::FqiOptions fqi;  // reward is set per method
};

struct MethodContext {
  const cohort::Cohort& cohort;
  const HarnessOptions& options;
  std::uint64_t seed;
  /// Stable per-method key for evaluation substreams.
  std::uint64_t method_key;
};

/// Per-patient outcomes of the method's proposed regimes, indexed by id.
using MethodFn = std::function<std::vector<regime::Evaluation>(const MethodContext&)>;

class MethodRegistry {
 public:
  /// Throws std::invalid_argument on a duplicate name.
  void add(std::string name, MethodFn fn);
  bool contains(std::string_view name) const;
  const MethodFn& at(std::string_view name) const;
  const std::vector<std::string>& names() const { return names_; }

  /// Observed, Expert, Inaction, Full Dosing, Random, Linear Q-learning,
  /// Linear Inf Naive, Linear Inf Insightful, Linear Inf Oracle, Our Method.
  static MethodRegistry builtin();

 private:
  std::vector<std::string> names_;
  std::vector<MethodFn> fns_;
};

std::uint64_t method_key(std::string_view name);

/// Evaluates one dose rule per patient with substream
/// (seed, evaluation, key, patient, replicate).
std::vector<regime::Evaluation> evaluate_rules(
    const MethodContext& ctx, const std::function<DoseRule(const cohort::PatientRecord&)>& rule_for,
    std::uint64_t replicate = 0);

struct MethodResult {
  std::optional<regime::Evaluation> mean;  // empty when the method failed
  std::string error;
};

struct RunResult {
  std::size_t sim = 0;
  std::size_t iter = 0;
  cohort::SimSetup setup;
  std::vector<std::string> methods;
  std::vector<MethodResult> results;
};

/// Setup of a 1-based simulation number.
cohort::SimSetup setup_for_sim(std::size_t sim, std::size_t n = 1000);

/// Generates the cohort with seed iter + seed_offset and runs every method.
/// Method exceptions are recorded as failures and never escape.
RunResult run_iteration(std::size_t sim, std::size_t iter, std::span<const std::string> methods,
                        const HarnessOptions& options, const MethodRegistry& registry,
                        std::uint64_t seed_offset = 0);

/// Sim, Iter, Covs, T Setting, T Drop Setting, Binary Dose, Policy, methods...
std::vector<std::string> result_header(std::span<const std::string> methods);
/// The same without Iter, for per-setup files.
std::vector<std::string> setup_header(std::span<const std::string> methods);

struct SweepOptions {
  std::vector<std::size_t> sims;
  std::size_t iters = 20;
  std::uint64_t seed_offset = 0;
  std::vector<std::string> methods;
  std::size_t jobs = 1;
  std::filesystem::path out = "results";
  HarnessOptions harness;
  /// Recorded in the manifest; a resumed sweep must match it.
  std::string config_hash;
};

struct SweepSummary {
  std::size_t computed = 0;
  std::size_t reused = 0;
};

/// Runs every missing (Sim, Iter) cell, committing both result files after
/// each cell, then rewrites the nan and aggregate files. Cells already in the
/// output directory are kept. Throws std::runtime_error when the directory
/// holds results for other methods or another configuration.
SweepSummary sweep(const SweepOptions& options, const MethodRegistry& registry);

/// Rewrites all_sims_nan.csv and the six aggregate files from the two
/// per-iteration result files in `dir`.
void write_aggregates(const std::filesystem::path& dir);

}  // namespace regimen::harness
