#include <stdexcept>
#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "regimen/pipeline.hpp"

using namespace regimen;
using namespace regimen::pipeline;

namespace {

cohort::Cohort small_cohort(std::size_t index, std::size_t n, std::uint64_t seed) {
  auto setup = cohort::enumerate_setups(n)[index];
  setup.seed = seed;
  return cohort::generate_cohort(setup);
}

}  // namespace

TEST_CASE("matching features are covariates then standardized mechanistic parameters") {
  const auto c = small_cohort(1, 300, 4);
  const auto v = match_features(c);
  REQUIRE(v.cols == 14);
  CHECK(v.names.front() == "X1");
  CHECK(v.names[10] == "beta");
  CHECK(v.names.back() == "ed50");
  for (std::size_t j = 0; j < v.cols; ++j) {
    double m = 0, s = 0;
    for (std::size_t i = 0; i < v.rows; ++i) m += v.at(i, j);
    m /= static_cast<double>(v.rows);
    for (std::size_t i = 0; i < v.rows; ++i) s += (v.at(i, j) - m) * (v.at(i, j) - m);
    CHECK(std::abs(m) < 1e-9);
    CHECK(s / static_cast<double>(v.rows) == doctest::Approx(1.0));
  }
}

TEST_CASE("rotated folds estimate every patient once per estimation fold") {
  const auto c = small_cohort(1, 250, 2);
  const auto res = run_pipeline(c, {}, 2);
  REQUIRE(res.metrics.size() == 5);
  for (std::size_t i = 0; i < 250; ++i) {
    REQUIRE(res.estimates[i].size() == 4);
    std::set<std::size_t> metric_folds;
    for (std::size_t f = 0, e = 0; f < 5; ++f) {
      if (f == res.fold_of[i]) continue;
      const auto& est = res.estimates[i][e++];
      CHECK(est.neighbors.size() == 5);
      for (std::size_t nb : est.neighbors) {
        CHECK(nb != i);
        CHECK(res.fold_of[nb] != f);
        CHECK(c.observed[nb].y == 0);
      }
      for (double w : est.weights) CHECK(w == doctest::Approx(0.2));
    }
  }
}

TEST_CASE("metric learning never sees estimation-fold outcomes") {
  const auto c = small_cohort(1, 250, 3);
  const auto base = run_pipeline(c, {}, 3);
  auto tainted = c;
  for (std::size_t i = 0; i < 250; ++i) {
    if (base.fold_of[i] != 0) tainted.observed[i].y = 1 - tainted.observed[i].y;
  }
  const auto res = run_pipeline(tainted, {}, 3);
  CHECK(res.fold_of == base.fold_of);
  CHECK(res.metrics[0].weights == base.metrics[0].weights);
  bool any_other_changed = false;
  for (std::size_t f = 1; f < 5; ++f) any_other_changed |= res.metrics[f].weights != base.metrics[f].weights;
  CHECK(any_other_changed);
}

TEST_CASE("pipeline is deterministic") {
  const auto c = small_cohort(13, 200, 5);
  const auto a = run_pipeline(c, {}, 5);
  const auto b = run_pipeline(c, {}, 5);
  for (std::size_t i = 0; i < 200; ++i) {
    REQUIRE(a.estimates[i].size() == b.estimates[i].size());
    for (std::size_t r = 0; r < a.estimates[i].size(); ++r) {
      CHECK(a.estimates[i][r].policy == b.estimates[i][r].policy);
    }
  }
}

TEST_CASE("parameter averaging is the mean of the fold estimates") {
  const auto c = small_cohort(1, 150, 6);
  const auto res = run_pipeline(c, {}, 6);
  const auto avg = averaged_regimes(res);
  REQUIRE(avg.size() == 150);
  for (std::size_t i = 0; i < 150; i += 7) {
    for (std::size_t j = 0; j < 10; ++j) {
      double m = 0.0;
      for (const auto& e : res.estimates[i]) m += e.policy.coeffs[j] / 4.0;
      CHECK(avg[i].coeffs[j] == doctest::Approx(m));
    }
  }
}

TEST_CASE("caliper groups fall back to the nearest good patient when empty") {
  const auto c = small_cohort(1, 200, 7);
  PipelineOptions opt;
  opt.caliper = 0.0;
  const auto res = run_pipeline(c, opt, 7);
  CHECK(res.empty_calipers == 200 * 4);
  for (const auto& list : res.estimates) {
    for (const auto& e : list) CHECK(e.neighbors.size() == 1);
  }
  opt.caliper = 1e9;
  const auto wide = run_pipeline(c, opt, 7);
  CHECK(wide.empty_calipers == 0);
}

TEST_CASE("simplex search mode produces convex weights") {
  const auto c = small_cohort(1, 200, 8);
  PipelineOptions opt;
  opt.mode = regime::Mode::simplex_search;
  const auto res = run_pipeline(c, opt, 8);
  std::size_t valued = 0;
  for (const auto& list : res.estimates) {
    for (const auto& e : list) {
      double total = 0.0;
      for (double w : e.weights) {
        CHECK(w >= 0.0);
        total += w;
      }
      CHECK(total == doctest::Approx(1.0));
      valued += e.value.has_value();
    }
  }
  CHECK(valued + res.simplex_fallbacks == 800);
  CHECK(valued > 0);
}

TEST_CASE("too few good patients surfaces as a shortfall") {
  auto c = small_cohort(1, 150, 9);
  for (auto& o : c.observed) o.y = 1;
  CHECK_THROWS_AS(run_pipeline(c, {}, 9), matching::InsufficientNeighbors);
}
