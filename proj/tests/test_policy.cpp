#include <stdexcept>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "regimen/policy.hpp"
#include "regimen/rng.hpp"

using namespace regimen;
using namespace regimen::policy;

namespace {

Trajectory history(double e0, std::vector<double> burdens, std::vector<double> doses) {
  Trajectory t;
  t.e0 = e0;
  t.burden = std::move(burdens);
  t.dose = {std::move(doses)};
  return t;
}

PolicyParams random_policy(Rng& rng, TemplateId id = TemplateId::synthetic10,
                           ActionSpace space = ActionSpace::continuous()) {
  PolicyParams p{id, std::vector<double>(coeff_count(id)), space, 0};
  for (double& c : p.coeffs) c = rng.normal(0.0, 20.0);
  return p;
}

FeatureRow random_features(Rng& rng, std::size_t n) {
  FeatureRow f;
  f.values.resize(n);
  for (double& v : f.values) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
  return f;
}

// Random burdens, doses produced step by step by `zeta` without projection.
Trajectory unprojected_run(const PolicyParams& zeta, std::size_t steps, Rng& rng) {
  Trajectory t;
  t.e0 = rng.uniform(0, 100);
  t.dose.resize(1);
  for (std::size_t s = 1; s <= steps; ++s) {
    t.burden.push_back(0.0);
    t.dose[0].push_back(0.0);
    const auto f = template_features(zeta.template_id, HistoryView(t, s));
    t.dose[0][s - 1] = score(zeta, f);
    t.burden[s - 1] = rng.uniform(0, 100);
  }
  return t;
}

}  // namespace

TEST_CASE("synthetic features at E=65, Z=0, t=2") {
  const auto t = history(70, {65}, {0});
  const auto f = features_synthetic10(HistoryView(t, 2));
  const std::array<double, 10> expected{1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
  CHECK(f == expected);
}

TEST_CASE("all-zero history gives no active features") {
  const auto t = history(0, {0, 0, 0}, {0, 0, 0});
  for (std::size_t s = 1; s <= 4; ++s) {
    const auto f = features_synthetic10(HistoryView(t, s));
    for (double v : f) CHECK(v == 0.0);
  }
}

TEST_CASE("rolling burden feature needs three steps of history") {
  // E_0, E_1, E_2 = 15, 15, 45: mean 25 over the window and E_{t-1} = 45.
  const auto t = history(15, {15, 45}, {0, 0});
  CHECK(features_synthetic10(HistoryView(t, 3))[8] == 1.0);
  const auto short_t = history(5, {45}, {0});
  CHECK(features_synthetic10(HistoryView(short_t, 2))[8] == 0.0);
}

TEST_CASE("policy evaluation on table means") {
  const auto t = history(70, {65}, {0});
  const auto f = template_features(TemplateId::synthetic10, HistoryView(t, 2));
  const auto aggressive = make_informed_policy(PolicyType::aggressive, ActionSpace::continuous(), nullptr);
  CHECK(evaluate(aggressive, f) == 80.0);

  PolicyParams zero{TemplateId::synthetic10, std::vector<double>(10, 0.0), ActionSpace::continuous(), 0};
  CHECK(evaluate(zero, f) == 0.0);

  FeatureRow f57;
  f57.values = {0, 0, 0, 0, 1, 0, 1, 0, 0, 0};
  const auto conservative = make_informed_policy(PolicyType::conservative, ActionSpace::binary(), nullptr);
  CHECK(score(conservative, f57) == 0.0);
  CHECK(evaluate(conservative, f57) == 0.0);
}

TEST_CASE("binary projection snaps to the nearest level with ties to zero") {
  const auto b = ActionSpace::binary();
  CHECK(b.project(25.0) == 0.0);
  CHECK(b.project(25.0001) == 50.0);
  CHECK(b.project(-40) == 0.0);
  CHECK(b.project(400) == 50.0);
  const auto c = ActionSpace::continuous();
  CHECK(c.project(-3) == 0.0);
  CHECK(c.project(130) == 100.0);
  CHECK(c.project(42.5) == 42.5);
}

TEST_CASE("evaluated doses always lie in the action space") {
  Rng rng(8);
  for (int i = 0; i < 500; ++i) {
    const auto space = i % 2 ? ActionSpace::binary() : ActionSpace::continuous();
    const auto p = random_policy(rng, TemplateId::synthetic10, space);
    CHECK(space.contains(evaluate(p, random_features(rng, 10))));
  }
}

TEST_CASE("type probabilities") {
  const std::vector<double> zero(10, 0.0);
  for (double p : type_probabilities(zero)) CHECK(p == doctest::Approx(1.0 / 3.0));
  const std::vector<double> tilted{3, 3, -3, -3, 0, 0};
  const auto p = type_probabilities(tilted);
  CHECK(p[0] > 0.9);
  CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0));
  CHECK_THROWS_AS(type_probabilities(std::vector<double>{1, 2, 3}), std::invalid_argument);
}

TEST_CASE("binary informed coefficients carry no jitter") {
  Rng rng(4);
  for (auto type : {PolicyType::aggressive, PolicyType::moderate, PolicyType::conservative}) {
    const auto jittered = make_informed_policy(type, ActionSpace::binary(), &rng);
    const auto means = informed_coefficient_means(type, ActionSpace::Kind::binary);
    CHECK(jittered.coeffs == std::vector<double>(means.begin(), means.end()));
    const auto cont = make_informed_policy(type, ActionSpace::continuous(), &rng);
    const auto cmeans = informed_coefficient_means(type, ActionSpace::Kind::continuous);
    double gap = 0.0;
    for (std::size_t j = 0; j < 10; ++j) gap += std::abs(cont.coeffs[j] - cmeans[j]);
    CHECK(gap > 0.0);
  }
}

TEST_CASE("combine validation") {
  Rng rng(1);
  const auto a = random_policy(rng), b = random_policy(rng);
  const std::vector<PolicyParams> two{a, b};
  CHECK(combine(std::vector<PolicyParams>{a}, std::vector<double>{1.0}) == a);
  const auto half = combine(two, std::vector<double>{0.5, 0.5});
  for (std::size_t j = 0; j < 10; ++j) CHECK(half.coeffs[j] == doctest::Approx((a.coeffs[j] + b.coeffs[j]) / 2));

  CHECK_THROWS_AS(combine(two, std::vector<double>{0.7, 0.4}), std::invalid_argument);
  CHECK_THROWS_AS(combine(two, std::vector<double>{1.2, -0.2}), std::invalid_argument);
  CHECK_THROWS_AS(combine(two, std::vector<double>{1.0}), std::invalid_argument);
  const auto other = random_policy(rng, TemplateId::propofol);
  CHECK_THROWS_AS(combine(std::vector<PolicyParams>{a, other}, std::vector<double>{0.5, 0.5}),
                  std::invalid_argument);
  auto binary = b;
  binary.action_space = ActionSpace::binary();
  CHECK_THROWS_AS(combine(std::vector<PolicyParams>{a, binary}, std::vector<double>{0.5, 0.5}),
                  std::invalid_argument);
}

TEST_CASE("addition is associative and commutative; combine is linear in scores") {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_policy(rng), b = random_policy(rng), c = random_policy(rng);
    const auto f = random_features(rng, 10);
    CHECK(score(add(a, b), f) == doctest::Approx(score(add(b, a), f)));
    CHECK(score(add(add(a, b), c), f) == doctest::Approx(score(add(a, add(b, c)), f)));
    CHECK(score(add(a, b), f) == doctest::Approx(score(a, f) + score(b, f)));

    std::vector<double> w{rng.uniform(), rng.uniform(), rng.uniform()};
    const double total = w[0] + w[1] + w[2];
    for (double& x : w) x /= total;
    const auto mixed = combine(std::vector<PolicyParams>{a, b, c}, w);
    const double expected = w[0] * score(a, f) + w[1] * score(b, f) + w[2] * score(c, f);
    CHECK(score(mixed, f) == doctest::Approx(expected));
  }
}

TEST_CASE("levetiracetam gate silences the policy after a recent dose") {
  PolicyParams lev{TemplateId::levetiracetam, std::vector<double>(8, 10.0), ActionSpace::continuous(), 0};
  const auto dosed = history(80, {80, 80}, {0, 20});
  const auto fresh = history(80, {80, 80}, {0, 0});
  const auto gated = template_features(TemplateId::levetiracetam, HistoryView(dosed, 3));
  const auto open = template_features(TemplateId::levetiracetam, HistoryView(fresh, 3));
  CHECK(gated.gate == 0.0);
  CHECK(evaluate(lev, gated) == 0.0);
  CHECK(open.gate == 1.0);
  CHECK(evaluate(lev, open) == 80.0);
}

TEST_CASE("fit_policy recovers generating coefficients exactly") {
  Rng rng(12);
  PolicyParams zeta{TemplateId::synthetic10,
                    {10, 10, 20, 20, 20, 20, -10, -20, 20, -20},
                    ActionSpace::continuous(-1000, 1000), 0};
  const auto traj = unprojected_run(zeta, 200, rng);
  const auto fit = fit_policy(traj, TemplateId::synthetic10, zeta.action_space, 0.0);
  REQUIRE_FALSE(fit.rank_deficient);
  for (std::size_t j = 0; j < 10; ++j) CHECK(std::abs(fit.policy.coeffs[j] - zeta.coeffs[j]) < 1e-8);
  CHECK(fit.r2 == doctest::Approx(1.0));
}

TEST_CASE("fit_policy scales with the doses") {
  Rng rng(13);
  PolicyParams zeta{TemplateId::propofol, {5, 4, 3, 6, 2, 7, 1}, ActionSpace::continuous(), 0};
  auto traj = unprojected_run(zeta, 120, rng);
  const auto base = fit_policy(traj, TemplateId::propofol, zeta.action_space, 0.0);
  REQUIRE_FALSE(base.rank_deficient);
  for (double& z : traj.dose[0]) z *= 3.5;
  const auto scaled = fit_policy(traj, TemplateId::propofol, zeta.action_space, 0.0);
  for (std::size_t j = 0; j < 7; ++j) CHECK(scaled.policy.coeffs[j] == doctest::Approx(3.5 * base.policy.coeffs[j]));
}

TEST_CASE("fit_policy on constant-zero doses is degenerate") {
  const auto traj = history(50, {40, 60, 70, 20}, {0, 0, 0, 0});
  const auto fit = fit_policy(traj, TemplateId::synthetic10, ActionSpace::continuous());
  CHECK(fit.degenerate);
  CHECK(fit.r2 == 0.0);
  for (double c : fit.policy.coeffs) CHECK(c == 0.0);
  CHECK(fit.rank_deficient);
  CHECK_THROWS_AS(fit_policy(Trajectory{0.0, {}, {{}}, {}}, TemplateId::synthetic10, ActionSpace::continuous()),
                  std::invalid_argument);
}

TEST_CASE("serialization round-trips exactly") {
  Rng rng(21);
  for (int i = 0; i < 100; ++i) {
    const auto id = static_cast<TemplateId>(i % 3);
    auto p = random_policy(rng, id, i % 2 ? ActionSpace::binary() : ActionSpace::continuous(0, 37.25));
    for (double& c : p.coeffs) c = c / 3.0 + 1e-13 * rng.uniform();
    p.drug_slot = static_cast<std::size_t>(i % 2);
    CHECK(parse_policy(serialize(p)) == p);
  }
  CHECK_THROWS_AS(parse_policy("synthetic10|binary|0|1,2"), std::invalid_argument);
  CHECK_THROWS_AS(parse_policy("nonsense|binary|0|"), std::invalid_argument);
}

TEST_CASE("random rules stay in the action space") {
  Rng rng(30);
  const Trajectory t = history(0, {}, {});
  double out[1];
  const auto bin = make_random_rule(ActionSpace::binary());
  const auto cont = make_random_rule(ActionSpace::continuous());
  int fifties = 0;
  for (int i = 0; i < 2000; ++i) {
    bin(HistoryView(t, 1), rng, out);
    CHECK(ActionSpace::binary().contains(out[0]));
    fifties += out[0] == 50.0;
    cont(HistoryView(t, 1), rng, out);
    CHECK(ActionSpace::continuous().contains(out[0]));
  }
  CHECK(std::abs(fifties - 1000) < 120);
}
