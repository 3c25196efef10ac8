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

// Synthetic cohort generation: covariates, mechanistic parameters, horizons,
// missingness, clinician policies, outcomes, and per-step rewards.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "regimen/pkpd.hpp"
#include "regimen/policy.hpp"
#include "regimen/trajectory.hpp"

namespace regimen::cohort {

inline constexpr double kBurdenNoiseSd = 2.5;
inline constexpr double kOutcomeCutoff = 3.0;

enum class HorizonMode { two_steps, ten_to_fifteen };
enum class MissingMode { none, variable };
enum class PolicyMode { random, informed };

struct StepRange {
  std::size_t lo;
  std::size_t hi;  // inclusive
};

struct SimSetup {
  std::size_t n = 1000;
  std::size_t p = 10;
  HorizonMode horizon = HorizonMode::two_steps;
  MissingMode missing = MissingMode::none;
  policy::ActionSpace::Kind action = policy::ActionSpace::Kind::continuous;
  PolicyMode policy_mode = PolicyMode::random;
  std::uint64_t seed = 1;

  StepRange horizon_range() const;
  StepRange missing_range() const;
  policy::ActionSpace action_space() const;
  /// Throws std::invalid_argument when n == 0 or p < 4.
  void validate() const;
  /// Aspects only (no n or seed), e.g. "p=10 T=a drop=a dose=continuous policy=random".
  std::string describe() const;
  bool same_aspects(const SimSetup& other) const;
};

/// The 32 combinations of the five aspects in lexicographic order: covariate
/// count, horizon, missingness, action space, policy mode.
std::vector<SimSetup> enumerate_setups(std::size_t n = 1000);

/// Latent and observed facts about one patient. Everything except the
/// observed prefix of the trajectory, x and y is oracle-only.
struct PatientRecord {
  std::size_t id = 0;
  std::vector<double> x;
  pkpd::PkPdParams params;
  std::size_t tau = 0;
  std::size_t missing = 0;
  double e0 = 0.0;
  policy::PolicyType policy_type = policy::PolicyType::moderate;
  /// Jittered informed policy; unused when the cohort doses at random.
  policy::PolicyParams assigned_policy;
  Trajectory trajectory;
  double o = 0.0;
  int y = 0;

  std::size_t observed_steps() const { return tau - missing; }
};

/// What an estimator may see: X, E_0..E_T, Z_1..Z_T and Y.
struct ObservedPatient {
  std::size_t id = 0;
  std::vector<double> x;
  Trajectory history;  // conc left empty
  int y = 0;

  std::size_t observed_steps() const { return history.length(); }
};

struct Cohort {
  SimSetup setup;
  std::vector<PatientRecord> oracle;
  std::vector<ObservedPatient> observed;
};

/// Draws covariates, mechanistic parameters, horizons, E_0, the policy type
/// and the informed policy. The trajectory and outcome are left empty.
PatientRecord sample_patient(const SimSetup& setup, std::size_t id, Rng& rng);

struct Outcome {
  double o = 0.0;
  int y = 0;
};

/// Continuous outcome averaged over tau steps and its binarization at 3.
Outcome outcome(const Trajectory& traj, std::span<const double> x, std::size_t tau);

enum class RewardKind { naive, insightful, oracle };
std::string_view reward_name(RewardKind kind);

double reward(RewardKind kind, double e_prev, double e_t, double z_t, double d_t,
              std::span<const double> x);

/// Dose rule the clinician follows for this patient under the setup.
DoseRule clinician_rule(const SimSetup& setup, const PatientRecord& patient);

/// Simulates the full trajectory and outcome of an already sampled patient.
void simulate_patient(const SimSetup& setup, PatientRecord& patient);

/// Generates the cohort. Patient i draws from substreams keyed by
/// (seed, i), so the result does not depend on `jobs`.
Cohort generate_cohort(const SimSetup& setup, std::size_t jobs = 1);

ObservedPatient observe(const PatientRecord& patient);

/// Writes observed_patients.csv, observed_steps.csv (the estimator's view),
/// oracle_patients.csv, oracle_steps.csv and meta.txt into `dir`.
void write_cohort(const Cohort& cohort, const std::filesystem::path& dir);

/// Reads the estimator's view back from a directory written by write_cohort.
std::vector<ObservedPatient> read_observed(const std::filesystem::path& dir);

}  // namespace regimen::cohort
