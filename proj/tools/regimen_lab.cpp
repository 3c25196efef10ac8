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

// regimen-lab command-line entry point.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "regimen/cohortsim.hpp"
#include "regimen/config.hpp"
#include "regimen/csv.hpp"
#include "regimen/harness.hpp"
#include "regimen/parallel.hpp"

namespace fs = std::filesystem;
using namespace regimen;

namespace {

struct Flags {
  std::string config;
  std::optional<std::string> setups;
  std::optional<std::size_t> iters;
  std::optional<std::string> methods;
  std::optional<std::size_t> jobs;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed_offset;
};

void add_flags(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "key = value configuration file");
  app->add_option("--setups", f.setups, "setup selection, e.g. 30 or 1-4 or covs:100+policy:informed");
  app->add_option("--iters", f.iters, "iterations per setup (seeds 1..N)");
  app->add_option("--methods", f.methods, "comma-separated method names");
  app->add_option("--jobs", f.jobs, "worker threads");
  app->add_option("--out", f.out, "output directory");
  app->add_option("--seed-offset", f.seed_offset, "added to the iteration number to form the seed");
}

// Precedence: flag, then OUTPUT_DIR for the output directory, then file, then default.
config::Config resolve(const Flags& f) {
  config::Config c = f.config.empty() ? config::Config{} : config::load(f.config);
  if (const char* env = std::getenv("OUTPUT_DIR"); env && *env) config::apply(c, "out", env);
  if (f.setups) config::apply(c, "setups", *f.setups);
  if (f.iters) config::apply(c, "iters", std::to_string(*f.iters));
  if (f.methods) config::apply(c, "methods", *f.methods);
  if (f.jobs) config::apply(c, "jobs", std::to_string(*f.jobs));
  if (f.out) config::apply(c, "out", *f.out);
  if (f.seed_offset) config::apply(c, "seed_offset", std::to_string(*f.seed_offset));
  return c;
}

int fail(std::string_view command, std::string_view kind, std::string_view message, int code) {
  nlohmann::json j{{"status", "error"}, {"command", command}, {"kind", kind}, {"message", message}};
  std::cerr << j.dump() << "\n";
  return code;
}

void cmd_generate(const config::Config& c) {
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  for (std::size_t sim : c.setups) {
    for (std::size_t it = 1; it <= c.iters; ++it) cells.push_back({sim, it});
  }
  parallel_for(cells.size(), c.jobs, [&](std::size_t k) {
    const auto [sim, it] = cells[k];
    auto setup = harness::setup_for_sim(sim, c.harness.n);
    setup.seed = it + c.seed_offset;
    char name[64];
    std::snprintf(name, sizeof name, "sim%02zu_iter%03zu", sim, it);
    cohort::write_cohort(cohort::generate_cohort(setup), c.out / "cohorts" / name);
  });
  std::cout << "wrote " << cells.size() << " cohorts under " << (c.out / "cohorts").string() << "\n";
}

void cmd_sweep(const config::Config& c) {
  const auto registry = harness::MethodRegistry::builtin();
  const auto summary = harness::sweep(c.sweep_options(registry), registry);
  std::cout << "computed " << summary.computed << " cells, reused " << summary.reused
            << ", results in " << c.out.string() << "\n";
}

int cmd_report(const fs::path& dir) {
  const fs::path mean_path = dir / "sims_binary_outcomes_mean.csv";
  const fs::path sd_path = dir / "sims_binary_outcomes_std.csv";
  if (!fs::exists(mean_path) || !fs::exists(sd_path)) {
    return fail("report", "no_results", "no results in " + dir.string(), 1);
  }
  const auto mean = csv::read(mean_path);
  const auto sd = csv::read(sd_path);
  if (mean.rows.empty()) return fail("report", "no_results", "no results in " + dir.string(), 1);
  constexpr std::size_t first_method = 6;  // Sim and five setting columns
  for (std::size_t r = 0; r < mean.rows.size(); ++r) {
    const auto& row = mean.rows[r];
    std::printf("Sim %s  covs=%s T=%s drop=%s binary=%s policy=%s\n", row[0].c_str(),
                row[1].c_str(), row[2].c_str(), row[3].c_str(), row[4].c_str(), row[5].c_str());
    for (std::size_t m = first_method; m < mean.header.size(); ++m) {
      const std::string& mu = row[m];
      const std::string& s = sd.rows[r][m];
      if (mu == "NA") {
        std::printf("  %-24s failed\n", mean.header[m].c_str());
      } else {
        std::printf("  %-24s %.4f +/- %s\n", mean.header[m].c_str(), std::stod(mu),
                    s == "NA" ? "NA" : std::to_string(std::stod(s)).substr(0, 6).c_str());
      }
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"regimen-lab: matching-based treatment-regime simulation and benchmarking"};
  app.require_subcommand(1);
  Flags flags;
  auto* gen = app.add_subcommand("generate", "write simulated cohorts for the selected setups");
  auto* run = app.add_subcommand("run", "run the benchmark on a single setup");
  auto* sweep = app.add_subcommand("sweep", "run the benchmark over the selected setups");
  auto* report = app.add_subcommand("report", "summarize a result directory");
  for (auto* sub : {gen, run, sweep}) add_flags(sub, flags);
  std::string report_dir;
  report->add_option("dir", report_dir, "result directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail("parse", "usage", e.what(), 2);
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (command == "report") return cmd_report(report_dir);
    const config::Config c = resolve(flags);
    if (command == "generate") {
      cmd_generate(c);
    } else if (command == "run") {
      if (c.setups.size() != 1) {
        return fail(command, "config", "run takes exactly one setup; use sweep for more", 2);
      }
      cmd_sweep(c);
    } else {
      cmd_sweep(c);
    }
  } catch (const config::ConfigError& e) {
    return fail(command, "config", e.what(), 2);
  } catch (const std::exception& e) {
    return fail(command, "runtime", e.what(), 1);
  }
  return 0;
}
