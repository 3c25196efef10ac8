#include <stdexcept>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "regimen/csv.hpp"
#include "regimen/harness.hpp"

using namespace regimen;
using namespace regimen::harness;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("regimen_test_harness_" + name);
  fs::remove_all(d);
  return d;
}

std::vector<regime::Evaluation> constant(const MethodContext& ctx, double y, double o) {
  return std::vector<regime::Evaluation>(ctx.cohort.oracle.size(), regime::Evaluation{o, y});
}

// Cheap registry: two constants, one method that always fails and one that
// fails on even seeds.
MethodRegistry toy_registry() {
  MethodRegistry r;
  r.add("Quarter", [](const MethodContext& c) { return constant(c, 0.25, 1.5); });
  r.add("Half", [](const MethodContext& c) { return constant(c, 0.5, 2.0); });
  r.add("Broken", [](const MethodContext&) -> std::vector<regime::Evaluation> {
    throw std::runtime_error("always fails");
  });
  r.add("Flaky", [](const MethodContext& c) {
    if (c.seed % 2 == 0) throw std::runtime_error("even seed");
    return constant(c, static_cast<double>(c.seed) / 10.0, 0.0);
  });
  return r;
}

SweepOptions toy_sweep(const fs::path& out, std::size_t iters) {
  SweepOptions s;
  s.sims = {3, 5};
  s.iters = iters;
  s.methods = {"Quarter", "Half", "Broken", "Flaky"};
  s.out = out;
  s.harness.n = 40;
  s.config_hash = "toy";
  return s;
}

}  // namespace

TEST_CASE("method keys are FNV-1a of the name") {
  CHECK(method_key("Observed") == UINT64_C(0x6fc7df380df71881));
  CHECK(method_key("Our Method") == UINT64_C(0x03f3fb00aa7422da));
}

TEST_CASE("registry") {
  const auto r = MethodRegistry::builtin();
  const std::vector<std::string> expected{"Observed", "Expert", "Inaction", "Full Dosing", "Random",
                                          "Linear Q-learning", "Linear Inf Naive", "Linear Inf Insightful",
                                          "Linear Inf Oracle", "Our Method"};
  CHECK(r.names() == expected);
  CHECK(r.contains("Expert"));
  CHECK_FALSE(r.contains("Deep RL"));
  CHECK_THROWS(r.at("Deep RL"));
  auto t = toy_registry();
  CHECK_THROWS_AS(t.add("Half", [](const MethodContext& c) { return constant(c, 0, 0); }), std::invalid_argument);
}

TEST_CASE("result headers") {
  const std::vector<std::string> m{"Observed", "Our Method"};
  CHECK(result_header(m) == std::vector<std::string>{"Sim", "Iter", "Covs", "T Setting", "T Drop Setting",
                                                     "Binary Dose", "Policy", "Observed", "Our Method"});
  CHECK(setup_header(m) == std::vector<std::string>{"Sim", "Covs", "T Setting", "T Drop Setting",
                                                    "Binary Dose", "Policy", "Observed", "Our Method"});
}

TEST_CASE("setup numbering") {
  const auto s = setup_for_sim(30, 77);
  CHECK(s.n == 77);
  CHECK(s.describe() == "p=100 T=b drop=b dose=continuous policy=informed");
  CHECK(setup_for_sim(1).describe() == cohort::enumerate_setups().front().describe());
  CHECK_THROWS(setup_for_sim(0));
  CHECK_THROWS(setup_for_sim(33));
}

TEST_CASE("an iteration is reproducible and the observed column is the realized rate") {
  HarnessOptions opt;
  opt.n = 150;
  const auto reg = MethodRegistry::builtin();
  const auto& names = reg.names();
  const auto a = run_iteration(2, 4, names, opt, reg);
  const auto b = run_iteration(2, 4, names, opt, reg);
  REQUIRE(a.results.size() == names.size());
  for (std::size_t m = 0; m < names.size(); ++m) {
    REQUIRE(a.results[m].mean.has_value());
    CHECK(a.results[m].mean->y == b.results[m].mean->y);
    CHECK(a.results[m].mean->o == b.results[m].mean->o);
    CHECK(a.results[m].mean->y >= 0.0);
    CHECK(a.results[m].mean->y <= 1.0);
  }
  auto setup = setup_for_sim(2, 150);
  setup.seed = 4;
  const auto c = cohort::generate_cohort(setup);
  double y = 0.0, o = 0.0;
  for (const auto& r : c.oracle) {
    y += r.y;
    o += r.o;
  }
  CHECK(a.results[0].mean->y == doctest::Approx(y / 150.0));
  CHECK(a.results[0].mean->o == doctest::Approx(o / 150.0));
}

TEST_CASE("method failures are recorded, not raised") {
  HarnessOptions opt;
  opt.n = 30;
  const auto reg = toy_registry();
  const auto r = run_iteration(5, 2, reg.names(), opt, reg);
  CHECK(r.results[0].mean->y == 0.25);
  CHECK_FALSE(r.results[2].mean.has_value());
  CHECK(r.results[2].error.find("always fails") != std::string::npos);
  CHECK_FALSE(r.results[3].mean.has_value());
}

TEST_CASE("expert does not trail the clinicians on informed setups") {
  HarnessOptions opt;
  const auto reg = MethodRegistry::builtin();
  const std::vector<std::string> methods{"Observed", "Expert"};
  for (std::size_t sim : {14u, 30u}) {
    double observed = 0.0, expert = 0.0;
    for (std::size_t iter = 1; iter <= 20; ++iter) {
      const auto r = run_iteration(sim, iter, methods, opt, reg);
      observed += r.results[0].mean->y / 20.0;
      expert += r.results[1].mean->y / 20.0;
    }
    CHECK_MESSAGE(expert <= observed + 0.05, "sim ", sim, " expert ", expert, " observed ", observed);
  }
}

TEST_CASE("sweep shape, aggregates and failure counts") {
  const auto dir = fresh_dir("shape");
  const auto reg = toy_registry();
  const auto summary = sweep(toy_sweep(dir, 4), reg);
  CHECK(summary.computed == 8);
  CHECK(summary.reused == 0);

  const auto bin = csv::read(dir / "all_sims_binary_outcomes.csv");
  CHECK(bin.header == result_header(toy_sweep(dir, 4).methods));
  REQUIRE(bin.rows.size() == 8);
  CHECK(bin.rows[0][0] == "3");
  CHECK(bin.rows[0][1] == "1");
  CHECK(bin.rows[7][0] == "5");
  CHECK(bin.rows[7][1] == "4");
  CHECK(bin.rows[0][5] == "TRUE");
  CHECK(bin.rows[4][5] == "FALSE");
  for (const auto& row : bin.rows) CHECK(row[9] == "NA");

  const auto mean = csv::read(dir / "sims_binary_outcomes_mean.csv");
  const auto sd = csv::read(dir / "sims_binary_outcomes_std.csv");
  const auto med = csv::read(dir / "sims_cont_outcomes_median.csv");
  REQUIRE(mean.rows.size() == 2);
  CHECK(mean.header.front() == "Sim");
  CHECK(mean.header[1] == "Covs");
  CHECK(std::stod(mean.rows[0][6]) == 0.25);
  CHECK(std::stod(sd.rows[0][6]) == 0.0);
  CHECK(std::stod(med.rows[1][7]) == 2.0);
  CHECK(mean.rows[0][8] == "NA");
  // Flaky succeeds on odd seeds 1 and 3: mean of 0.1 and 0.3.
  CHECK(std::stod(mean.rows[0][9]) == doctest::Approx(0.2));

  const auto nan = csv::read(dir / "all_sims_nan.csv");
  REQUIRE(nan.rows.size() == 2);
  CHECK(nan.rows[0][6] == "0");
  CHECK(nan.rows[0][8] == "4");
  CHECK(nan.rows[1][9] == "2");
  const auto errors = csv::read(dir / "all_sims_errors.csv");
  CHECK(errors.header == csv::Row{"Sim", "Iter", "Method", "Error"});
  CHECK(errors.rows.size() == 8 + 4);

  const auto manifest = slurp(dir / "manifest.txt");
  CHECK(manifest.find("config_hash = toy") != std::string::npos);
  CHECK(manifest.find(std::string(kRngAlgorithm)) != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("sweeps resume and refuse foreign directories") {
  const auto dir = fresh_dir("resume");
  const auto reg = toy_registry();
  CHECK(sweep(toy_sweep(dir, 2), reg).computed == 4);
  const auto before = slurp(dir / "all_sims_binary_outcomes.csv");
  const auto again = sweep(toy_sweep(dir, 2), reg);
  CHECK(again.computed == 0);
  CHECK(again.reused == 4);
  CHECK(slurp(dir / "all_sims_binary_outcomes.csv") == before);
  const auto more = sweep(toy_sweep(dir, 3), reg);
  CHECK(more.computed == 2);
  CHECK(csv::read(dir / "all_sims_binary_outcomes.csv").rows.size() == 6);

  auto other = toy_sweep(dir, 3);
  other.config_hash = "different";
  CHECK_THROWS_AS(sweep(other, reg), std::runtime_error);
  auto fewer = toy_sweep(dir, 3);
  fewer.methods = {"Quarter"};
  CHECK_THROWS_AS(sweep(fewer, reg), std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("sweep output does not depend on the worker count") {
  const auto a = fresh_dir("jobs1"), b = fresh_dir("jobs3");
  const auto reg = MethodRegistry::builtin();
  for (const auto& [dir, jobs] : {std::pair{a, std::size_t{1}}, {b, std::size_t{3}}}) {
    SweepOptions s;
    s.sims = {2, 4};
    s.iters = 2;
    s.methods = {"Observed", "Random", "Linear Q-learning", "Our Method"};
    s.out = dir;
    s.jobs = jobs;
    s.harness.n = 120;
    s.config_hash = "jobs";
    sweep(s, reg);
  }
  for (const char* f : {"all_sims_binary_outcomes.csv", "all_sims_cont_outcomes.csv", "all_sims_nan.csv",
                        "sims_binary_outcomes_mean.csv", "sims_cont_outcomes_std.csv"}) {
    CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);
  }
  fs::remove_all(a);
  fs::remove_all(b);
}
