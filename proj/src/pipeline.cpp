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

#include "regimen/pipeline.hpp"

#include <stdexcept>

namespace regimen::pipeline {

matching::FeatureMatrix match_features(const cohort::Cohort& cohort) {
  const auto& oracle = cohort.oracle;
  if (oracle.empty()) throw std::invalid_argument("match_features: empty cohort");
  const std::size_t p = oracle.front().x.size();
  const std::size_t drugs = oracle.front().params.drugs.size();
  matching::FeatureMatrix v(oracle.size(), p + 1 + 3 * drugs);
  for (std::size_t j = 0; j < p; ++j) v.names.push_back("X" + std::to_string(j + 1));
  v.names.push_back("beta");
  for (std::size_t d = 0; d < drugs; ++d) {
    const std::string suffix = drugs > 1 ? std::to_string(d + 1) : "";
    v.names.push_back("gamma" + suffix);
    v.names.push_back("alpha" + suffix);
    v.names.push_back("ed50" + suffix);
  }
  for (std::size_t i = 0; i < oracle.size(); ++i) {
    auto row = v.row(i);
    std::size_t c = 0;
    for (double x : oracle[i].x) row[c++] = x;
    row[c++] = oracle[i].params.beta;
    for (const auto& d : oracle[i].params.drugs) {
      row[c++] = d.gamma;
      row[c++] = d.alpha;
      row[c++] = d.ed50;
    }
  }
  std::vector<std::size_t> all(v.rows);
  for (std::size_t i = 0; i < v.rows; ++i) all[i] = i;
  matching::Standardizer::fit(v, all).apply(v);
  return v;
}

PipelineResult run_pipeline(const cohort::Cohort& cohort, const PipelineOptions& options,
                            std::uint64_t seed) {
  const std::size_t n = cohort.observed.size();
  if (options.folds < 2) throw std::invalid_argument("run_pipeline: need at least 2 folds");
  PipelineResult res;
  const auto space = cohort.setup.action_space();

  res.fits.reserve(n);
  std::vector<policy::PolicyParams> policies;
  std::vector<int> y(n);
  std::vector<double> yd(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (cohort.observed[i].id != i) throw std::invalid_argument("run_pipeline: ids must be 0..n-1");
    res.fits.push_back(policy::fit_policy(cohort.observed[i].history,
                                          policy::TemplateId::synthetic10, space,
                                          options.policy_ridge));
    policies.push_back(res.fits.back().policy);
    y[i] = cohort.observed[i].y;
    yd[i] = y[i];
  }
  res.features = match_features(cohort);

  Rng fold_rng = Rng::substream(seed, Stream::folds, 0);
  res.fold_of = matching::honest_folds(n, options.folds, fold_rng);
  res.estimates.assign(n, {});

  for (std::size_t f = 0; f < options.folds; ++f) {
    const auto split = matching::split_fold(res.fold_of, f);
    std::vector<double> metric_y;
    metric_y.reserve(split.metric_rows.size());
    for (std::size_t r : split.metric_rows) metric_y.push_back(yd[r]);
    res.metrics.push_back(
        matching::learn_metric(res.features, split.metric_rows, metric_y, options.boosting));
    const auto& metric = res.metrics.back();

    const auto candidates = matching::Candidates::gather(res.features, split.estimation_rows, y);
    for (std::size_t i : split.estimation_rows) {
      const auto center = res.features.row(i);
      matching::MatchedGroup good;
      if (options.caliper) {
        good = matching::match(i, center, candidates, metric,
                               matching::MatchMode::caliper(*options.caliper), true);
        if (good.neighbors.empty()) {
          ++res.empty_calipers;
          good = matching::match(i, center, candidates, metric, matching::MatchMode::knn(1), true);
        }
      } else {
        good = matching::match(i, center, candidates, metric, matching::MatchMode::knn(options.k),
                               true);
      }
      std::optional<matching::MatchedGroup> context;
      if (options.mode == regime::Mode::simplex_search) {
        context = matching::match(i, center, candidates, metric,
                                  matching::MatchMode::knn(options.context_k), false);
      }
      auto est = regime::estimate_optimal(i, good, context ? &*context : nullptr, policies, y,
                                          options.mode, options.simplex);
      res.simplex_fallbacks += est.fell_back ? 1 : 0;
      res.estimates[i].push_back(std::move(est));
    }
  }
  return res;
}

std::vector<policy::PolicyParams> averaged_regimes(const PipelineResult& result) {
  std::vector<policy::PolicyParams> out;
  out.reserve(result.estimates.size());
  for (const auto& list : result.estimates) {
    if (list.empty()) throw std::logic_error("averaged_regimes: patient without estimate");
    std::vector<policy::PolicyParams> pols;
    for (const auto& e : list) pols.push_back(e.policy);
    const std::vector<double> w(pols.size(), 1.0 / static_cast<double>(pols.size()));
    out.push_back(policy::combine(pols, w));
  }
  return out;
}

}  // namespace regimen::pipeline
