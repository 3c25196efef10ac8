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

// One-compartment pharmacokinetics with Hill pharmacodynamics, trajectory
// simulation, and per-patient parameter estimation from observed series.

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "regimen/policy.hpp"
#include "regimen/rng.hpp"
#include "regimen/trajectory.hpp"

namespace regimen::pkpd {

struct DrugParams {
  double gamma = 1.0;  // elimination rate per step
  double alpha = 1.0;  // Hill coefficient
  double ed50 = 15.0;  // concentration for half effect

  bool operator==(const DrugParams&) const = default;
};

struct PkPdParams {
  double beta = 100.0;  // drug-free burden, percent
  std::vector<DrugParams> drugs{DrugParams{}};

  /// Throws std::invalid_argument unless beta in (0, 200] and every drug
  /// parameter is strictly positive.
  void validate() const;
  bool operator==(const PkPdParams&) const = default;
};

/// Drug table used by the clinical templates.
struct DrugInfo {
  std::string_view name;
  double half_life_hours;
  double typical_ed50;
  double typical_alpha;
};
inline constexpr DrugInfo kPropofol{"propofol", 20.0 / 60.0, 2.41, 2.96};
inline constexpr DrugInfo kLevetiracetam{"levetiracetam", 8.0, 2.26, 3.33};

/// Per-step elimination rate of a drug with the given half-life:
/// exp(-gamma) per step equals 2^(-hours per step / half-life).
double gamma_from_half_life(double half_life_hours, double steps_per_hour = 1.0);

/// D_t = exp(-gamma) D_{t-1} + Z_t.
double pk_step(double conc_prev, double dose, double gamma);

/// beta * (1 - sum_j D_j^a_j / (D_j^a_j + ED50_j^a_j)), clamped to [0, beta].
double pd_burden(std::span<const double> concs, const PkPdParams& params);

/// Advances the state through `tau` steps. At each step the rule picks the
/// doses from the history, concentrations follow pk_step from zero, and the
/// burden is the Hill value plus N(0, noise_sd), clamped to [0, beta].
/// Throws std::invalid_argument for tau == 0 or e0 outside [0, beta].
Trajectory simulate_trajectory(const PkPdParams& params, const DoseRule& rule, double e0,
                               std::size_t tau, double noise_sd, Rng& rng);

/// Convenience overload: follow `regime` (one policy per drug) with the given
/// clinician deviation.
Trajectory simulate_trajectory(const PkPdParams& params,
                               const std::vector<policy::PolicyParams>& regime, double e0,
                               std::size_t tau, double noise_sd,
                               const policy::DeviationSpec& deviation, Rng& rng);

/// Noise-free burden series implied by the doses of `observed`.
std::vector<double> predict_burden(const PkPdParams& params,
                                   const std::vector<std::vector<double>>& doses);

struct FitOptions {
  std::size_t restarts = 5;
  double tolerance = 1e-8;
  std::size_t max_evaluations = 2000;  // per restart
  std::uint64_t seed = 0;
  /// When set, used as the first start instead of the data-driven guess.
  std::optional<PkPdParams> initial;
};

struct FitResult {
  PkPdParams params;
  double loss = 0.0;  // mean squared burden error
  bool converged = false;
  /// No dose variation: only beta is identified.
  bool degenerate = false;
};

/// Least-squares fit of the mechanistic parameters to observed burdens.
/// With `fixed_gammas` the elimination rates are held (one per drug) and only
/// beta, alpha and ED50 are free. Parameters are searched on the log scale.
FitResult fit_pkpd(const Trajectory& observed,
                   std::optional<std::vector<double>> fixed_gammas = std::nullopt,
                   const FitOptions& options = {});

}  // namespace regimen::pkpd
