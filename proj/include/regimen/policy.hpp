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

// Linear policy templates, their evaluation, per-patient fitting of
// administered policies, and the coefficient algebra used to interpolate
// between policies.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "regimen/rng.hpp"
#include "regimen/trajectory.hpp"

namespace regimen::policy {

enum class TemplateId { synthetic10, propofol, levetiracetam };

std::string_view template_name(TemplateId id);
TemplateId parse_template(std::string_view name);
std::size_t coeff_count(TemplateId id);

/// Where doses live. Continuous spaces clamp; the binary space {0, 50} snaps
/// to the nearest level with ties going to 0.
struct ActionSpace {
  enum class Kind { continuous, binary };
  Kind kind = Kind::continuous;
  double lo = 0.0;
  double hi = 100.0;

  static ActionSpace continuous(double lo = 0.0, double hi = 100.0) {
    return {Kind::continuous, lo, hi};
  }
  static ActionSpace binary() { return {Kind::binary, 0.0, 50.0}; }

  double project(double score) const;
  bool contains(double dose) const;
  bool operator==(const ActionSpace&) const = default;
};

struct PolicyParams {
  TemplateId template_id = TemplateId::synthetic10;
  std::vector<double> coeffs;
  ActionSpace action_space;
  /// Index of the drug this policy doses (and whose history gates it).
  std::size_t drug_slot = 0;

  bool operator==(const PolicyParams&) const = default;
};

/// Conversion of the clinical templates' hour windows into timesteps.
struct TemplateClock {
  double steps_per_hour = 1.0;
  std::size_t window_steps(double hours) const;
};

struct FeatureRow {
  std::vector<double> values;
  /// Multiplies the whole linear score; only the levetiracetam template
  /// uses it (1 when no levetiracetam was given in the last 12 hours).
  double gate = 1.0;
};

/// The ten indicator features of the synthetic clinician template at step t.
std::array<double, 10> features_synthetic10(const HistoryView& h);

FeatureRow template_features(TemplateId id, const HistoryView& h, std::size_t drug_slot = 0,
                             const TemplateClock& clock = {});

/// Pre-projection score: gate * sum(coeff * feature).
double score(const PolicyParams& policy, const FeatureRow& features);
/// Score projected into the policy's action space.
double evaluate(const PolicyParams& policy, const FeatureRow& features);

/// Pointwise policy addition; on linear templates this adds coefficients.
PolicyParams add(const PolicyParams& a, const PolicyParams& b);

/// Convex combination of coefficient vectors. Throws std::invalid_argument on
/// mixed templates or action spaces, or weights that are negative or do not
/// sum to 1 within 1e-9.
PolicyParams combine(std::span<const PolicyParams> policies, std::span<const double> weights);

enum class PolicyType { aggressive = 0, moderate = 1, conservative = 2 };
std::string_view policy_type_name(PolicyType type);

/// Softmax with temperature 1 over (mean(x1,x2), 0, mean(x3,x4)), in the
/// order aggressive, moderate, conservative. Requires x.size() >= 4.
std::array<double, 3> type_probabilities(std::span<const double> x);
PolicyType draw_policy_type(std::span<const double> x, Rng& rng);

/// Coefficient means for a policy type in the given action space.
std::array<double, 10> informed_coefficient_means(PolicyType type, ActionSpace::Kind kind);

/// Synthetic informed policy. In the continuous space each coefficient gets
/// N(0, 1) jitter when `jitter` is non-null; binary coefficients are exact.
PolicyParams make_informed_policy(PolicyType type, ActionSpace space, Rng* jitter);

/// Per-step chance that the clinician ignores the policy. In the continuous
/// space the dose is drawn from N(E_{t-1}, sd) and clamped; in the binary
/// space it is uniform over {0, 50}.
struct DeviationSpec {
  double probability = 0.0;
  double sd = 10.0;

  static DeviationSpec none() { return {}; }
  static DeviationSpec clinician() { return {0.05, 10.0}; }
};

/// Dose rule following one policy per drug, with optional deviation.
DoseRule make_dose_rule(std::vector<PolicyParams> regime, DeviationSpec deviation = {},
                        TemplateClock clock = {});

/// Uniform random doses over the action space, every step.
DoseRule make_random_rule(ActionSpace space, std::size_t drugs = 1);
DoseRule make_constant_rule(double dose, std::size_t drugs = 1);

struct PolicyFit {
  PolicyParams policy;
  double r2 = 0.0;
  std::size_t rows = 0;
  /// Observed doses have no variance; R^2 is reported as 0.
  bool degenerate = false;
  /// Fewer distinct feature rows than coefficients; coefficients come from
  /// the ridge solution and carry low confidence.
  bool rank_deficient = false;
};

/// Ridge least squares of observed doses Z_1..Z_T of `drug_slot` on the
/// template features computed from the observed history. Throws
/// std::invalid_argument when there are no observed steps.
PolicyFit fit_policy(const Trajectory& observed, TemplateId id, ActionSpace space,
                     double ridge = 1e-3, std::size_t drug_slot = 0,
                     const TemplateClock& clock = {});

/// "<template>|<action>|<slot>|c1,c2,..." with 17 significant digits.
std::string serialize(const PolicyParams& policy);
PolicyParams parse_policy(std::string_view text);

}  // namespace regimen::policy
