#include <stdexcept>
#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "regimen/baselines.hpp"
#include "regimen/pkpd.hpp"

using namespace regimen;
using namespace regimen::baselines;
using cohort::ObservedPatient;

namespace {

ObservedPatient patient(std::size_t id, std::vector<double> x, double e0, std::vector<double> burden,
                        std::vector<double> dose, int y) {
  ObservedPatient p;
  p.id = id;
  p.x = std::move(x);
  p.history.e0 = e0;
  p.history.burden = std::move(burden);
  p.history.dose = {std::move(dose)};
  p.y = y;
  return p;
}

// Two binary steps; the outcome is good only when both doses are 50.
std::vector<ObservedPatient> dominant_fifty(std::size_t n, Rng& rng) {
  std::vector<ObservedPatient> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double z1 = rng.bernoulli(0.5) ? 50 : 0, z2 = rng.bernoulli(0.5) ? 50 : 0;
    const std::vector<double> x{rng.normal(0, 1), rng.normal(0, 1)};
    out.push_back(patient(i, x, rng.uniform(60, 90), {rng.uniform(20, 90), rng.uniform(20, 90)}, {z1, z2},
                          z1 == 50 && z2 == 50 ? 0 : 1));
  }
  return out;
}

std::vector<ObservedPatient> observed_cohort(std::size_t index, std::size_t n, std::uint64_t seed) {
  auto setup = cohort::enumerate_setups(n)[index];
  setup.seed = seed;
  return cohort::generate_cohort(setup).observed;
}

std::vector<double> rollout_doses(const QPolicy& q, std::vector<double> x, std::size_t steps) {
  pkpd::PkPdParams params;
  Rng rng(1);
  const auto t = pkpd::simulate_trajectory(params, q.rule(x), 70, steps, 0.0, rng);
  return t.dose[0];
}

}  // namespace

TEST_CASE("dose snapping") {
  CHECK(snap_dose(30, DoseGrid::binary()) == 50.0);
  CHECK(snap_dose(25, DoseGrid::binary()) == 0.0);
  CHECK(snap_dose(0, DoseGrid::binary()) == 0.0);
  CHECK(snap_dose(40, DoseGrid::five_level()) == 50.0);
  CHECK(snap_dose(12.5, DoseGrid::five_level()) == 0.0);
  CHECK(snap_dose(88, DoseGrid::five_level()) == 100.0);
  CHECK(DoseGrid::five_level().index(63) == 3);
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double z = rng.uniform(0, 100);
    for (auto g : {DoseGrid::binary(), DoseGrid::five_level()}) {
      const double s = snap_dose(z, g);
      CHECK(snap_dose(s, g) == s);
      const auto lv = g.levels();
      CHECK(std::find(lv.begin(), lv.end(), s) != lv.end());
      CHECK(lv[g.index(z)] == s);
    }
  }
  CHECK(parse_grid(grid_name(DoseGrid::five_level())) == DoseGrid::five_level());
  CHECK_THROWS_AS(parse_grid("seven"), std::invalid_argument);
}

TEST_CASE("preset policies") {
  auto setup = cohort::enumerate_setups()[1];
  Rng rng(2);
  auto rec = cohort::sample_patient(setup, 0, rng);
  cohort::simulate_patient(setup, rec);
  const HistoryView h(rec.trajectory, 2);
  double out[1];
  preset_policy(Preset::inaction, setup, rec)(h, rng, out);
  CHECK(out[0] == 0.0);
  preset_policy(Preset::full_dosing, setup, rec)(h, rng, out);
  CHECK(out[0] == 100.0);
  preset_policy(Preset::expert, setup, rec)(h, rng, out);
  const auto table = policy::make_informed_policy(rec.policy_type, setup.action_space(), nullptr);
  CHECK(out[0] == policy::evaluate(table, policy::template_features(policy::TemplateId::synthetic10, h)));
  for (int i = 0; i < 100; ++i) {
    preset_policy(Preset::random, setup, rec)(h, rng, out);
    CHECK(setup.action_space().contains(out[0]));
  }
  auto binary = cohort::enumerate_setups()[3];
  preset_policy(Preset::full_dosing, binary, rec)(h, rng, out);
  CHECK(out[0] == 50.0);
}

TEST_CASE("expert reproduces the noiseless informed policy on matched histories") {
  auto setup = cohort::enumerate_setups()[13];
  for (std::size_t i = 0; i < 30; ++i) {
    Rng rng = Rng::substream(4, Stream::patient, i);
    auto rec = cohort::sample_patient(setup, i, rng);
    cohort::simulate_patient(setup, rec);
    const auto rule = preset_policy(Preset::expert, setup, rec);
    const auto noiseless = policy::make_dose_rule(
        {policy::make_informed_policy(rec.policy_type, setup.action_space(), nullptr)});
    for (std::size_t t = 1; t <= rec.tau; ++t) {
      double a[1], b[1];
      rule(HistoryView(rec.trajectory, t), rng, a);
      noiseless(HistoryView(rec.trajectory, t), rng, b);
      CHECK(a[0] == b[0]);
    }
  }
}

TEST_CASE("state features") {
  const auto p = patient(0, {0.5, -1.0}, 80, {60, 40}, {30, 10}, 0);
  const auto s1 = state_features(HistoryView(p.history, 1), p.x, DoseGrid::binary());
  CHECK(s1 == std::vector<double>{1.0, 0.5, -1.0, 0.8, 0.0});
  const auto s2 = state_features(HistoryView(p.history, 2), p.x, DoseGrid::binary());
  CHECK(s2 == std::vector<double>{1.0, 0.5, -1.0, 0.6, 0.5});
}

TEST_CASE("backward induction learns to always dose 50 when it dominates") {
  Rng rng(3);
  const auto data = dominant_fifty(400, rng);
  const auto q = q_backward(data);
  CHECK(q.stages.size() == 2);
  Rng probe(9);
  for (int i = 0; i < 20; ++i) {
    const auto doses = rollout_doses(q, {probe.normal(0, 1), probe.normal(0, 1)}, 2);
    CHECK(doses == std::vector<double>{50.0, 50.0});
  }
}

TEST_CASE("backward induction uses the shortest observed horizon") {
  Rng rng(4);
  auto data = dominant_fifty(100, rng);
  data[7].history.burden.resize(1);
  data[7].history.dose[0].resize(1);
  const auto q = q_backward(data);
  CHECK(q.stages.size() == 1);
  // Steps past the horizon reuse the last stage.
  CHECK(rollout_doses(q, {0.0, 0.0}, 4).size() == 4);
  CHECK_THROWS_AS(q_backward(std::vector<ObservedPatient>{}), std::invalid_argument);
}

TEST_CASE("learned baselines are deterministic") {
  const auto data = observed_cohort(13, 300, 2);
  CHECK(serialize(q_backward(data)) == serialize(q_backward(data)));
  FqiOptions opt;
  opt.reward = cohort::RewardKind::insightful;
  CHECK(serialize(fitted_q_iteration(data, opt)) == serialize(fitted_q_iteration(data, opt)));
}

TEST_CASE("observed rewards rebuild concentrations at unit elimination") {
  const auto p = patient(0, {0, 0, 0, 0}, 70, {60, 55, 65}, {40, 0, 20}, 0);
  const auto naive = observed_rewards(p, cohort::RewardKind::naive);
  CHECK(naive == std::vector<double>{10 + 2.5, 5 + 12.5, -10 + 7.5});
  const auto oracle = observed_rewards(p, cohort::RewardKind::oracle);
  const double d2 = 40 * std::exp(-1.0);
  CHECK(oracle[1] == doctest::Approx(-(std::expm1(55 / 50.0) + std::expm1(d2 / 50.0))));
}

TEST_CASE("zero rewards give a zero Q-function") {
  Rng rng(5);
  std::vector<ObservedPatient> data;
  for (std::size_t i = 0; i < 80; ++i) {
    data.push_back(patient(i, {rng.normal(0, 1), rng.normal(0, 1)}, 50, {50, 50, 50}, {50, 50, 50}, 0));
  }
  for (double r : observed_rewards(data[0], cohort::RewardKind::naive)) REQUIRE(r == 0.0);
  FqiOptions opt;
  opt.iterations = 7;
  const auto q = fitted_q_iteration(data, opt);
  CHECK(q.stages.front().coef.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("one-step bandit picks the better arm") {
  Rng rng(6);
  std::vector<ObservedPatient> data;
  for (std::size_t i = 0; i < 300; ++i) {
    const bool dose = rng.bernoulli(0.5);
    const double e0 = rng.uniform(60, 90);
    // Dosing lowers the burden by 30: naive reward 30 versus 12.5.
    data.push_back(patient(i, {rng.normal(0, 1)}, e0, {dose ? e0 - 30 : e0}, {dose ? 50.0 : 0.0}, 0));
  }
  FqiOptions opt;
  opt.discount = 0.0;
  const auto q = fitted_q_iteration(data, opt);
  Rng probe(2);
  for (int i = 0; i < 20; ++i) {
    cohort::ObservedPatient h = patient(0, {probe.normal(0, 1)}, probe.uniform(60, 90), {}, {}, 0);
    CHECK(q.greedy_level(HistoryView(h.history, 1), h.x) == 1);
  }
}

TEST_CASE("fitted Q stays within the discounted reward bound") {
  const auto data = observed_cohort(13, 400, 3);
  for (auto kind : {cohort::RewardKind::naive, cohort::RewardKind::insightful, cohort::RewardKind::oracle}) {
    FqiOptions opt;
    opt.reward = kind;
    const auto q = fitted_q_iteration(data, opt);
    double r_max = 0.0;
    for (const auto& d : data) {
      for (double r : observed_rewards(d, kind)) r_max = std::max(r_max, std::abs(r));
    }
    const double bound = r_max / (1.0 - opt.discount);
    double peak = 0.0;
    const auto& stage = q.stages.front();
    for (const auto& d : data) {
      for (std::size_t t = 1; t <= d.observed_steps(); ++t) {
        const auto s = state_features(HistoryView(d.history, t), d.x, opt.grid);
        const auto p = stage.propensities(s);
        for (std::size_t a = 0; a < p.size(); ++a) peak = std::max(peak, std::abs(stage.q(s, a, p[a])));
      }
    }
    CHECK_MESSAGE(peak <= bound, cohort::reward_name(kind), " peak ", peak, " bound ", bound);
  }
}

TEST_CASE("divergence guard") {
  const auto data = observed_cohort(13, 200, 4);
  FqiOptions opt;
  opt.reward = cohort::RewardKind::insightful;
  opt.divergence_limit = 1.0;
  CHECK_THROWS_AS(fitted_q_iteration(data, opt), Diverged);
  opt.discount = 1.0;
  CHECK_THROWS_AS(fitted_q_iteration(data, opt), std::invalid_argument);
}

TEST_CASE("propensities are clipped and normalized") {
  const auto data = observed_cohort(13, 300, 5);
  const auto q = q_backward(data, QOptions{DoseGrid::five_level(), 1e-3});
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> s{1.0};
    for (int j = 0; j < 10; ++j) s.push_back(rng.normal(0, 3));
    s.push_back(rng.uniform(0, 1));
    s.push_back(0.25 * static_cast<double>(rng.uniform_int(0, 4)));
    const auto p = q.stages.front().propensities(s);
    double total = 0.0;
    for (double v : p) {
      CHECK(v > 0.0);
      total += v;
    }
    CHECK(total == doctest::Approx(1.0));
  }
}

TEST_CASE("policy serialization round-trips") {
  const auto data = observed_cohort(13, 300, 6);
  for (auto grid : {DoseGrid::binary(), DoseGrid::five_level()}) {
    const auto q = q_backward(data, QOptions{grid, 1e-3});
    const auto text = serialize(q);
    CHECK(text.rfind("tabular-greedy|", 0) == 0);
    const auto back = parse_qpolicy(text);
    CHECK(back.grid == q.grid);
    CHECK(back.covariates == q.covariates);
    REQUIRE(back.stages.size() == q.stages.size());
    for (std::size_t k = 0; k < q.stages.size(); ++k) {
      CHECK(back.stages[k].coef == q.stages[k].coef);
      CHECK(back.stages[k].propensity == q.stages[k].propensity);
    }
    CHECK(serialize(back) == text);
  }
  CHECK_THROWS(parse_qpolicy("tabular-greedy|binary|2"));
}
