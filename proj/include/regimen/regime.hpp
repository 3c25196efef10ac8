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

// Per-patient optimal-regime estimation by convex interpolation over the
// policies of a matched group, and ground-truth evaluation of regimes.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "regimen/cohortsim.hpp"
#include "regimen/matching.hpp"
#include "regimen/policy.hpp"
#include "regimen/rng.hpp"

namespace regimen::regime {

enum class Mode { uniform, simplex_search };
std::string_view mode_name(Mode mode);
Mode parse_mode(std::string_view name);

struct RegimeEstimate {
  std::size_t patient = 0;
  policy::PolicyParams policy;
  std::vector<std::size_t> neighbors;
  std::vector<double> weights;  // convex, aligned with neighbors
  Mode mode = Mode::uniform;
  /// Fitted value of the chosen weights (simplex_search only).
  std::optional<double> value;
  /// simplex_search could not fit its value model and used uniform weights.
  bool fell_back = false;
};

struct SimplexSearchOptions {
  std::size_t iterations = 500;
  double step = 0.1;
  double ridge = 1e-3;
};

/// Euclidean projection onto the probability simplex (sorted-threshold rule).
std::vector<double> project_to_simplex(std::span<const double> v);

/// Linear value model nu(theta) = intercept + slope . theta fitted on policy
/// coefficients and outcomes.
struct ValueModel {
  double intercept = 0.0;
  std::vector<double> slope;
  bool degenerate = false;

  double operator()(std::span<const double> theta) const;
};

/// Ridge fit of y on the coefficient rows; `degenerate` when y is constant or
/// the design has fewer distinct rows than coefficients + 1.
ValueModel fit_value_model(std::span<const policy::PolicyParams> policies,
                           std::span<const double> y, double ridge);

/// Minimizes `model` over convex combinations of `vertices` by projected
/// gradient descent started from every vertex and from the centroid.
std::vector<double> minimize_on_simplex(const ValueModel& model,
                                        std::span<const policy::PolicyParams> vertices,
                                        const SimplexSearchOptions& options = {});

/// `policies` and `y` are indexed by patient id. `context` (good and bad
/// neighbours) is required by simplex_search and must hold at least
/// coefficient dimension + 1 patients.
RegimeEstimate estimate_optimal(std::size_t center, const matching::MatchedGroup& matched_good,
                                const matching::MatchedGroup* context,
                                std::span<const policy::PolicyParams> policies,
                                std::span<const int> y, Mode mode,
                                const SimplexSearchOptions& options = {});

struct Evaluation {
  double o = 0.0;  // mean continuous outcome
  double y = 0.0;  // mean binary outcome
};

/// Mean outcomes of `rollouts` fresh trajectories of the patient's horizon
/// under `rule`, with burden noise and without clinician deviation.
Evaluation evaluate_regime(const DoseRule& rule, const cohort::PatientRecord& patient,
                           std::size_t rollouts, Rng& rng);
Evaluation evaluate_regime(const policy::PolicyParams& policy,
                           const cohort::PatientRecord& patient, std::size_t rollouts, Rng& rng);

/// All weight vectors over `k` vertices whose entries are multiples of 1/steps.
std::vector<std::vector<double>> simplex_grid(std::size_t k, std::size_t steps);

struct GridOracle {
  std::vector<double> weights;
  Evaluation selected;  // value at the chosen grid point (selection rollouts)
};

/// Brute force over simplex_grid(vertices, steps): every grid point is valued
/// with `rollouts` simulations on common random numbers and the lowest mean
/// binary outcome wins (mean continuous outcome breaks ties).
GridOracle grid_oracle(std::span<const policy::PolicyParams> vertices,
                       const cohort::PatientRecord& patient, std::size_t steps,
                       std::size_t rollouts, std::uint64_t seed);

void write_estimates_csv(const std::filesystem::path& path,
                         std::span<const RegimeEstimate> estimates);

}  // namespace regimen::regime
