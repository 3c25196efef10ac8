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

#include "regimen/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "regimen/csv.hpp"
#include "regimen/parallel.hpp"
#include "regimen/rng.hpp"

namespace regimen::harness {

namespace {

constexpr std::string_view kBinaryFile = "all_sims_binary_outcomes.csv";
constexpr std::string_view kContFile = "all_sims_cont_outcomes.csv";
constexpr std::string_view kNanFile = "all_sims_nan.csv";
constexpr std::string_view kErrorsFile = "all_sims_errors.csv";
constexpr std::string_view kManifest = "manifest.txt";
constexpr std::size_t kIdColumns = 7;

regime::Evaluation mean_of(std::span<const regime::Evaluation> evals) {
  if (evals.empty()) throw std::runtime_error("method produced no evaluations");
  regime::Evaluation m;
  for (const auto& e : evals) {
    m.o += e.o;
    m.y += e.y;
  }
  m.o /= static_cast<double>(evals.size());
  m.y /= static_cast<double>(evals.size());
  return m;
}

MethodFn preset_method(baselines::Preset kind) {
  return [kind](const MethodContext& ctx) {
    return evaluate_rules(ctx, [&](const cohort::PatientRecord& p) {
      return baselines::preset_policy(kind, ctx.cohort.setup, p);
    });
  };
}

MethodFn fqi_method(cohort::RewardKind reward) {
  return [reward](const MethodContext& ctx) {
    baselines::FqiOptions opt = ctx.options.fqi;
    opt.reward = reward;
    const auto q = baselines::fitted_q_iteration(ctx.cohort.observed, opt);
    return evaluate_rules(ctx, [&](const cohort::PatientRecord& p) { return q.rule(p.x); });
  };
}

std::vector<regime::Evaluation> our_method(const MethodContext& ctx) {
  const auto& pipe = ctx.options.pipeline;
  const auto res = pipeline::run_pipeline(ctx.cohort, pipe, ctx.seed);
  const auto& oracle = ctx.cohort.oracle;
  if (pipe.average == pipeline::FoldAverage::parameters) {
    const auto regimes = pipeline::averaged_regimes(res);
    return evaluate_rules(ctx, [&](const cohort::PatientRecord& p) {
      return policy::make_dose_rule({regimes[p.id]});
    });
  }
  // Evaluate each fold's estimate separately and average the outcomes.
  std::vector<regime::Evaluation> out(oracle.size());
  for (std::size_t i = 0; i < oracle.size(); ++i) {
    const auto& list = res.estimates[i];
    for (std::size_t r = 0; r < list.size(); ++r) {
      Rng rng = Rng::substream(ctx.seed, {static_cast<std::uint64_t>(Stream::evaluation),
                                          ctx.method_key, i, r});
      const auto e = regime::evaluate_regime(list[r].policy, oracle[i], ctx.options.rollouts, rng);
      out[i].o += e.o / static_cast<double>(list.size());
      out[i].y += e.y / static_cast<double>(list.size());
    }
  }
  return out;
}

std::string tf(bool v) { return v ? "TRUE" : "FALSE"; }

csv::Row id_columns(std::size_t sim, std::optional<std::size_t> iter, const cohort::SimSetup& s) {
  csv::Row row{std::to_string(sim)};
  if (iter) row.push_back(std::to_string(*iter));
  row.push_back(std::to_string(s.p));
  row.push_back(s.horizon == cohort::HorizonMode::two_steps ? "a" : "b");
  row.push_back(s.missing == cohort::MissingMode::none ? "a" : "b");
  row.push_back(tf(s.action == policy::ActionSpace::Kind::binary));
  row.push_back(s.policy_mode == cohort::PolicyMode::random ? "random" : "informed");
  return row;
}

std::map<std::string, std::string> read_manifest(const std::filesystem::path& path) {
  std::map<std::string, std::string> out;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

std::string join_names(std::span<const std::string> names) {
  std::string s;
  for (std::size_t i = 0; i < names.size(); ++i) s += (i ? "," : "") + names[i];
  return s;
}

using CellKey = std::pair<std::size_t, std::size_t>;  // (Sim, Iter)

std::size_t parse_index(const std::string& s) {
  std::size_t pos = 0;
  const unsigned long long v = std::stoull(s, &pos);
  if (pos != s.size()) throw std::runtime_error("bad index in result file: " + s);
  return static_cast<std::size_t>(v);
}

std::map<CellKey, csv::Row> load_rows(const std::filesystem::path& path,
                                      const csv::Row& header) {
  std::map<CellKey, csv::Row> rows;
  if (!std::filesystem::exists(path)) return rows;
  const auto t = csv::read(path);
  if (t.header != header) {
    throw std::runtime_error(path.string() + " has a different method set; use a new output directory");
  }
  for (const auto& r : t.rows) rows[{parse_index(r[0]), parse_index(r[1])}] = r;
  return rows;
}

void write_rows(const std::filesystem::path& path, const csv::Row& header,
                const std::map<CellKey, csv::Row>& rows) {
  csv::Table t;
  t.header = header;
  for (const auto& [key, row] : rows) t.rows.push_back(row);
  csv::write_atomic(path, t);
}

std::optional<double> parse_cell(const std::string& s) {
  if (s == "NA") return std::nullopt;
  return std::stod(s);
}

}  // namespace

void MethodRegistry::add(std::string name, MethodFn fn) {
  if (contains(name)) throw std::invalid_argument("method already registered: " + name);
  names_.push_back(std::move(name));
  fns_.push_back(std::move(fn));
}

bool MethodRegistry::contains(std::string_view name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

const MethodFn& MethodRegistry::at(std::string_view name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw std::invalid_argument("unknown method: " + std::string(name));
  return fns_[static_cast<std::size_t>(it - names_.begin())];
}

MethodRegistry MethodRegistry::builtin() {
  MethodRegistry r;
  r.add("Observed", [](const MethodContext& ctx) {
    std::vector<regime::Evaluation> out;
    for (const auto& p : ctx.cohort.oracle) out.push_back({p.o, static_cast<double>(p.y)});
    return out;
  });
  r.add("Expert", preset_method(baselines::Preset::expert));
  r.add("Inaction", preset_method(baselines::Preset::inaction));
  r.add("Full Dosing", preset_method(baselines::Preset::full_dosing));
  r.add("Random", preset_method(baselines::Preset::random));
  r.add("Linear Q-learning", [](const MethodContext& ctx) {
    const auto q = baselines::q_backward(ctx.cohort.observed, ctx.options.q);
    return evaluate_rules(ctx, [&](const cohort::PatientRecord& p) { return q.rule(p.x); });
  });
  r.add("Linear Inf Naive", fqi_method(cohort::RewardKind::naive));
  r.add("Linear Inf Insightful", fqi_method(cohort::RewardKind::insightful));
  r.add("Linear Inf Oracle", fqi_method(cohort::RewardKind::oracle));
  r.add("Our Method", our_method);
  return r;
}

std::uint64_t method_key(std::string_view name) {
  std::uint64_t h = 14695981039346656037ull;  // FNV-1a
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::vector<regime::Evaluation> evaluate_rules(
    const MethodContext& ctx, const std::function<DoseRule(const cohort::PatientRecord&)>& rule_for,
    std::uint64_t replicate) {
  std::vector<regime::Evaluation> out;
  out.reserve(ctx.cohort.oracle.size());
  for (const auto& p : ctx.cohort.oracle) {
    Rng rng = Rng::substream(
        ctx.seed, {static_cast<std::uint64_t>(Stream::evaluation), ctx.method_key, p.id, replicate});
    out.push_back(regime::evaluate_regime(rule_for(p), p, ctx.options.rollouts, rng));
  }
  return out;
}

cohort::SimSetup setup_for_sim(std::size_t sim, std::size_t n) {
  const auto all = cohort::enumerate_setups(n);
  if (sim < 1 || sim > all.size()) {
    throw std::invalid_argument("simulation number must be in 1.." + std::to_string(all.size()));
  }
  return all[sim - 1];
}

RunResult run_iteration(std::size_t sim, std::size_t iter, std::span<const std::string> methods,
                        const HarnessOptions& options, const MethodRegistry& registry,
                        std::uint64_t seed_offset) {
  if (iter < 1) throw std::invalid_argument("iterations are numbered from 1");
  RunResult rr;
  rr.sim = sim;
  rr.iter = iter;
  rr.setup = setup_for_sim(sim, options.n);
  rr.setup.seed = iter + seed_offset;
  rr.methods.assign(methods.begin(), methods.end());
  for (const auto& m : methods) registry.at(m);  // unknown names are caller errors

  const cohort::Cohort cohort = cohort::generate_cohort(rr.setup);
  for (const auto& m : methods) {
    MethodResult res;
    try {
      const MethodContext ctx{cohort, options, rr.setup.seed, method_key(m)};
      res.mean = mean_of(registry.at(m)(ctx));
    } catch (const std::exception& e) {
      res.error = e.what();
    }
    rr.results.push_back(std::move(res));
  }
  return rr;
}

std::vector<std::string> result_header(std::span<const std::string> methods) {
  std::vector<std::string> h{"Sim",         "Iter",   "Covs", "T Setting", "T Drop Setting",
                             "Binary Dose", "Policy"};
  h.insert(h.end(), methods.begin(), methods.end());
  return h;
}

std::vector<std::string> setup_header(std::span<const std::string> methods) {
  auto h = result_header(methods);
  h.erase(h.begin() + 1);
  return h;
}

SweepSummary sweep(const SweepOptions& options, const MethodRegistry& registry) {
  if (options.methods.empty()) throw std::invalid_argument("sweep: no methods selected");
  if (options.sims.empty()) throw std::invalid_argument("sweep: no setups selected");
  for (const auto& m : options.methods) registry.at(m);
  const auto& dir = options.out;
  std::filesystem::create_directories(dir);

  const auto manifest_path = dir / kManifest;
  const std::string methods_text = join_names(options.methods);
  if (std::filesystem::exists(manifest_path)) {
    const auto m = read_manifest(manifest_path);
    const auto hash = m.find("config_hash");
    if (hash == m.end() || hash->second != options.config_hash) {
      throw std::runtime_error("output directory was produced with another configuration: " +
                               dir.string());
    }
    const auto methods = m.find("methods");
    if (methods == m.end() || methods->second != methods_text) {
      throw std::runtime_error("output directory holds another method set: " + dir.string());
    }
  }
  std::ostringstream manifest;
  manifest << "toolkit = regimen-lab " << kVersion << "\n"
           << "config_hash = " << options.config_hash << "\n"
           << "rng = " << kRngAlgorithm << "\n"
           << "methods = " << methods_text << "\n"
           << "seed_rule = iteration + " << options.seed_offset << "\n";
  csv::write_text_atomic(manifest_path, manifest.str());

  const auto header = result_header(options.methods);
  const csv::Row error_header{"Sim", "Iter", "Method", "Error"};
  auto binary = load_rows(dir / kBinaryFile, header);
  auto cont = load_rows(dir / kContFile, header);
  std::map<std::pair<CellKey, std::string>, csv::Row> errors;
  if (std::filesystem::exists(dir / kErrorsFile)) {
    for (auto& r : csv::read(dir / kErrorsFile).rows) {
      errors[{{parse_index(r[0]), parse_index(r[1])}, r[2]}] = r;
    }
  }

  std::vector<CellKey> todo;
  SweepSummary summary;
  for (std::size_t sim : options.sims) {
    setup_for_sim(sim);
    for (std::size_t it = 1; it <= options.iters; ++it) {
      if (binary.count({sim, it}) && cont.count({sim, it})) {
        ++summary.reused;
      } else {
        todo.push_back({sim, it});
      }
    }
  }

  std::mutex commit;
  parallel_for(todo.size(), options.jobs, [&](std::size_t k) {
    const auto [sim, it] = todo[k];
    const RunResult rr =
        run_iteration(sim, it, options.methods, options.harness, registry, options.seed_offset);
    csv::Row b = id_columns(sim, it, rr.setup);
    csv::Row c = b;
    std::vector<csv::Row> errs;
    for (std::size_t m = 0; m < rr.methods.size(); ++m) {
      const auto& res = rr.results[m];
      b.push_back(res.mean ? csv::format_double(res.mean->y) : "NA");
      c.push_back(res.mean ? csv::format_double(res.mean->o) : "NA");
      if (!res.mean) errs.push_back({std::to_string(sim), std::to_string(it), rr.methods[m], res.error});
    }
    std::lock_guard lock(commit);
    binary[{sim, it}] = std::move(b);
    cont[{sim, it}] = std::move(c);
    for (auto& e : errs) errors[{{sim, it}, e[2]}] = std::move(e);
    write_rows(dir / kBinaryFile, header, binary);
    write_rows(dir / kContFile, header, cont);
    csv::Table et;
    et.header = error_header;
    for (const auto& [key, row] : errors) et.rows.push_back(row);
    csv::write_atomic(dir / kErrorsFile, et);
    ++summary.computed;
  });
  if (todo.empty()) {
    // Keep the files present even when every cell was reused.
    write_rows(dir / kBinaryFile, header, binary);
    write_rows(dir / kContFile, header, cont);
  }
  write_aggregates(dir);
  return summary;
}

void write_aggregates(const std::filesystem::path& dir) {
  const auto binary = csv::read(dir / kBinaryFile);
  const auto cont = csv::read(dir / kContFile);
  if (binary.header.size() < kIdColumns || binary.header != cont.header) {
    throw std::runtime_error("result files in " + dir.string() + " are malformed");
  }
  const std::vector<std::string> methods(binary.header.begin() + kIdColumns, binary.header.end());
  const auto header = setup_header(methods);

  // Rows are grouped by Sim in file order (the files are sorted by Sim, Iter).
  auto group = [](const csv::Table& t) {
    std::map<std::size_t, std::vector<const csv::Row*>> g;
    for (const auto& r : t.rows) g[parse_index(r[0])].push_back(&r);
    return g;
  };
  auto id_of = [](const csv::Row& r) {
    csv::Row out{r[0]};
    out.insert(out.end(), r.begin() + 2, r.begin() + kIdColumns);
    return out;
  };

  csv::Table nan;
  nan.header = header;
  for (const auto& [sim, rows] : group(binary)) {
    csv::Row out = id_of(*rows.front());
    for (std::size_t m = 0; m < methods.size(); ++m) {
      std::size_t failures = 0;
      for (const auto* r : rows) failures += (*r)[kIdColumns + m] == "NA" ? 1 : 0;
      out.push_back(std::to_string(failures));
    }
    nan.rows.push_back(std::move(out));
  }
  csv::write_atomic(dir / kNanFile, nan);

  for (const auto& [table, stem] :
       {std::pair{&binary, std::string("sims_binary_outcomes")}, {&cont, "sims_cont_outcomes"}}) {
    csv::Table mean, sd, median;
    mean.header = sd.header = median.header = header;
    for (const auto& [sim, rows] : group(*table)) {
      csv::Row rm = id_of(*rows.front()), rs = rm, rmed = rm;
      for (std::size_t m = 0; m < methods.size(); ++m) {
        std::vector<double> v;
        for (const auto* r : rows) {
          if (auto x = parse_cell((*r)[kIdColumns + m])) v.push_back(*x);
        }
        if (v.empty()) {
          rm.push_back("NA");
          rs.push_back("NA");
          rmed.push_back("NA");
          continue;
        }
        double s = 0.0;
        for (double x : v) s += x;
        const double mu = s / static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - mu) * (x - mu);
        std::sort(v.begin(), v.end());
        const std::size_t h = v.size() / 2;
        const double med = v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
        rm.push_back(csv::format_double(mu));
        rs.push_back(v.size() > 1 ? csv::format_double(std::sqrt(ss / static_cast<double>(v.size() - 1)))
                                  : "NA");
        rmed.push_back(csv::format_double(med));
      }
      mean.rows.push_back(std::move(rm));
      sd.rows.push_back(std::move(rs));
      median.rows.push_back(std::move(rmed));
    }
    csv::write_atomic(dir / (stem + "_mean.csv"), mean);
    csv::write_atomic(dir / (stem + "_std.csv"), sd);
    csv::write_atomic(dir / (stem + "_median.csv"), median);
  }
}

}  // namespace regimen::harness
