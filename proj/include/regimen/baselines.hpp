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

// Comparison methods: preset dosing policies, finite-horizon backward
// induction Q-learning, and fitted Q-iteration, all with linear Q-functions
// over a discretized dose grid.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "regimen/cohortsim.hpp"
#include "regimen/trajectory.hpp"

namespace regimen::baselines {

struct DoseGrid {
  enum class Kind { binary, five_level };
  Kind kind = Kind::binary;

  static DoseGrid binary() { return {Kind::binary}; }
  static DoseGrid five_level() { return {Kind::five_level}; }

  std::vector<double> levels() const;
  /// Position of snap(dose) in levels().
  std::size_t index(double dose) const;
  bool operator==(const DoseGrid&) const = default;
};

std::string_view grid_name(DoseGrid grid);
DoseGrid parse_grid(std::string_view name);

/// 50 * 1[z > 25] on the binary grid; 25 * (number of thresholds 12.5,
/// 37.5, 62.5, 87.5 exceeded) on the five-level grid.
double snap_dose(double dose, DoseGrid grid);

enum class Preset { inaction, full_dosing, random, expert };

/// Inaction doses 0; full dosing the top of the action space; random is
/// uniform over the action space; expert follows the patient's policy type
/// at the table means, without jitter or deviation.
DoseRule preset_policy(Preset kind, const cohort::SimSetup& setup,
                       const cohort::PatientRecord& patient);

/// Linear Q-function state: intercept, covariates, last burden and last
/// snapped dose (both divided by 100).
std::vector<double> state_features(const HistoryView& h, std::span<const double> x, DoseGrid grid);

/// One linear Q model: Q(s, a) = phi(s, a) . coef with phi the main effects of
/// s, the interactions of s with each non-zero dose level, and the estimated
/// propensity of a given s.
struct StageModel {
  Eigen::VectorXd coef;
  /// Rows: dose levels; columns: state features. Linear propensity scores,
  /// clipped to [0.01, 1] and renormalized.
  Eigen::MatrixXd propensity;

  std::vector<double> propensities(std::span<const double> s) const;
  double q(std::span<const double> s, std::size_t level, double propensity) const;
};

/// Greedy policy over the dose grid from a list of stage models. Step t uses
/// stage min(t, stages) - 1.
struct QPolicy {
  DoseGrid grid;
  std::size_t covariates = 0;
  std::vector<StageModel> stages;
  /// A stage regression needed the ridge fallback.
  bool ridge_fallback = false;

  std::size_t greedy_level(const HistoryView& h, std::span<const double> x) const;
  DoseRule rule(std::vector<double> x) const;
};

struct QOptions {
  DoseGrid grid = DoseGrid::binary();
  double ridge = 1e-3;
};

/// Backward induction on the common observed horizon T = min_i T_i with the
/// flipped outcome -Y as terminal value. Throws std::invalid_argument on an
/// empty dataset.
QPolicy q_backward(std::span<const cohort::ObservedPatient> data, const QOptions& options = {});

struct FqiOptions {
  DoseGrid grid = DoseGrid::binary();
  cohort::RewardKind reward = cohort::RewardKind::naive;
  std::size_t iterations = 50;
  double discount = 0.9;
  double ridge = 1e-3;
  double divergence_limit = 1e6;
};

class Diverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-step rewards of an observed patient, with the concentration rebuilt
/// from the observed doses at the nominal elimination rate 1.
std::vector<double> observed_rewards(const cohort::ObservedPatient& patient,
                                     cohort::RewardKind kind);

/// Fitted Q-iteration over all observed transitions pooled across steps.
/// Throws Diverged when max |Q| on the data exceeds the divergence limit.
QPolicy fitted_q_iteration(std::span<const cohort::ObservedPatient> data,
                           const FqiOptions& options = {});

/// "tabular-greedy|<grid>|<covariates>|<stages>|<stage>;<stage>..." where each
/// stage lists its Q coefficients then its propensity matrix row-major.
std::string serialize(const QPolicy& policy);
QPolicy parse_qpolicy(std::string_view text);

}  // namespace regimen::baselines
