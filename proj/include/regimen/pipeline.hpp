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

// The matching estimator end to end: per-patient policy fits, matching
// features, honest rotated folds, metric learning, matched groups and
// interpolated regimes.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "regimen/cohortsim.hpp"
#include "regimen/matching.hpp"
#include "regimen/policy.hpp"
#include "regimen/regime.hpp"

namespace regimen::pipeline {

enum class FoldAverage { outcomes, parameters };

struct PipelineOptions {
  regime::Mode mode = regime::Mode::uniform;
  std::size_t k = 5;
  /// When set, matched groups are all good patients within this distance.
  std::optional<double> caliper;
  /// Size of the unfiltered neighbourhood simplex_search fits its value on.
  std::size_t context_k = 30;
  std::size_t folds = 5;
  FoldAverage average = FoldAverage::outcomes;
  double policy_ridge = 1e-3;
  matching::BoostingConfig boosting;
  regime::SimplexSearchOptions simplex;
};

/// Covariates followed by the mechanistic parameters (beta, then gamma,
/// alpha, ED50 per drug), z-scored over the cohort.
matching::FeatureMatrix match_features(const cohort::Cohort& cohort);

struct PipelineResult {
  std::vector<policy::PolicyFit> fits;  // by patient id
  matching::FeatureMatrix features;
  std::vector<std::size_t> fold_of;
  std::vector<matching::DistanceMetric> metrics;  // one per metric fold
  /// Every estimate made for each patient, one per fold it was estimated in.
  std::vector<std::vector<regime::RegimeEstimate>> estimates;
  /// Caliper groups that came back empty and used the single nearest good
  /// patient instead.
  std::size_t empty_calipers = 0;
  std::size_t simplex_fallbacks = 0;
};

/// Uses substream (seed, folds) for the partition. Throws
/// matching::InsufficientNeighbors when an estimation split lacks k good
/// patients.
PipelineResult run_pipeline(const cohort::Cohort& cohort, const PipelineOptions& options,
                            std::uint64_t seed);

/// Mean of each patient's fold estimates; the proposed regime under
/// FoldAverage::parameters.
std::vector<policy::PolicyParams> averaged_regimes(const PipelineResult& result);

}  // namespace regimen::pipeline
