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

#include "regimen/cohortsim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "regimen/csv.hpp"
#include "regimen/parallel.hpp"

namespace regimen::cohort {

namespace {

using policy::ActionSpace;

constexpr double kMinPositive = 1e-3;

std::string action_name(ActionSpace::Kind k) {
  return k == ActionSpace::Kind::binary ? "binary" : "continuous";
}

}  // namespace

StepRange SimSetup::horizon_range() const {
  return horizon == HorizonMode::two_steps ? StepRange{2, 2} : StepRange{10, 15};
}

StepRange SimSetup::missing_range() const {
  if (missing == MissingMode::none) return {0, 0};
  return horizon == HorizonMode::two_steps ? StepRange{0, 1} : StepRange{2, 5};
}

ActionSpace SimSetup::action_space() const {
  return action == ActionSpace::Kind::binary ? ActionSpace::binary() : ActionSpace::continuous();
}

void SimSetup::validate() const {
  if (n == 0) throw std::invalid_argument("setup: n must be positive");
  if (p < 4) throw std::invalid_argument("setup: need at least 4 covariates");
}

std::string SimSetup::describe() const {
  std::ostringstream os;
  os << "p=" << p << " T=" << (horizon == HorizonMode::two_steps ? 'a' : 'b')
     << " drop=" << (missing == MissingMode::none ? 'a' : 'b') << " dose=" << action_name(action)
     << " policy=" << (policy_mode == PolicyMode::random ? "random" : "informed");
  return os.str();
}

bool SimSetup::same_aspects(const SimSetup& o) const {
  return p == o.p && horizon == o.horizon && missing == o.missing && action == o.action &&
         policy_mode == o.policy_mode;
}

std::vector<SimSetup> enumerate_setups(std::size_t n) {
  std::vector<SimSetup> out;
  for (std::size_t p : {std::size_t{10}, std::size_t{100}}) {
    for (auto h : {HorizonMode::two_steps, HorizonMode::ten_to_fifteen}) {
      for (auto m : {MissingMode::none, MissingMode::variable}) {
        for (auto a : {ActionSpace::Kind::continuous, ActionSpace::Kind::binary}) {
          for (auto pm : {PolicyMode::random, PolicyMode::informed}) {
            SimSetup s;
            s.n = n;
            s.p = p;
            s.horizon = h;
            s.missing = m;
            s.action = a;
            s.policy_mode = pm;
            out.push_back(s);
          }
        }
      }
    }
  }
  return out;
}

PatientRecord sample_patient(const SimSetup& setup, std::size_t id, Rng& rng) {
  setup.validate();
  PatientRecord r;
  r.id = id;
  r.x.resize(setup.p);
  for (double& v : r.x) v = rng.normal(0.0, 1.0);

  r.params.beta = std::clamp(rng.normal(100.0 + 10.0 * r.x[0], 5.0), kMinPositive, 200.0);
  pkpd::DrugParams drug;
  drug.ed50 = std::max(rng.normal(15.0 - 2.0 * r.x[2], 1.0), kMinPositive);
  drug.gamma = std::max(rng.normal(1.0, 0.1), kMinPositive);
  drug.alpha = std::max(rng.normal(1.0, 0.1), kMinPositive);
  r.params.drugs = {drug};

  const StepRange h = setup.horizon_range();
  const StepRange m = setup.missing_range();
  r.tau = rng.uniform_int(h.lo, h.hi);
  r.missing = rng.uniform_int(m.lo, m.hi);
  r.e0 = std::clamp(rng.normal(75.0 + 5.0 * r.x[1], 5.0), 0.0, r.params.beta);

  r.policy_type = policy::draw_policy_type(r.x, rng);
  r.assigned_policy = policy::make_informed_policy(r.policy_type, setup.action_space(), &rng);
  return r;
}

Outcome outcome(const Trajectory& traj, std::span<const double> x, std::size_t tau) {
  if (x.size() < 4) throw std::invalid_argument("outcome: need at least 4 covariates");
  if (tau == 0 || traj.length() < tau) throw std::invalid_argument("outcome: trajectory too short");
  const double burden_weight = std::exp((x[0] + x[1]) / 2.0);
  const double drug_weight = std::exp((x[2] + x[3]) / 2.0);
  double burden_sum = 0.0;
  double drug_sum = 0.0;
  for (std::size_t t = 0; t < tau; ++t) {
    burden_sum += std::expm1(traj.burden[t] / 50.0);
    for (const auto& c : traj.conc) drug_sum += std::expm1(c[t] / 50.0);
  }
  Outcome out;
  out.o = (burden_weight * burden_sum + drug_weight * drug_sum) / static_cast<double>(tau);
  out.y = out.o > kOutcomeCutoff ? 1 : 0;
  return out;
}

std::string_view reward_name(RewardKind kind) {
  switch (kind) {
    case RewardKind::naive: return "naive";
    case RewardKind::insightful: return "insightful";
    case RewardKind::oracle: return "oracle";
  }
  return "unknown";
}

double reward(RewardKind kind, double e_prev, double e_t, double z_t, double d_t,
              std::span<const double> x) {
  switch (kind) {
    case RewardKind::naive:
      return (e_prev - e_t) + (50.0 - z_t) / 4.0;
    case RewardKind::insightful:
      return -(std::exp(x[0]) * e_t + std::exp(x[2]) * z_t);
    case RewardKind::oracle:
      return -(std::exp((x[0] + x[1]) / 2.0) * std::expm1(e_t / 50.0) +
               std::exp((x[2] + x[3]) / 2.0) * std::expm1(d_t / 50.0));
  }
  return 0.0;
}

DoseRule clinician_rule(const SimSetup& setup, const PatientRecord& patient) {
  if (setup.policy_mode == PolicyMode::random) return policy::make_random_rule(setup.action_space());
  return policy::make_dose_rule({patient.assigned_policy}, policy::DeviationSpec::clinician());
}

void simulate_patient(const SimSetup& setup, PatientRecord& patient) {
  Rng rng = Rng::substream(setup.seed, Stream::trajectory, patient.id);
  patient.trajectory = pkpd::simulate_trajectory(patient.params, clinician_rule(setup, patient),
                                                 patient.e0, patient.tau, kBurdenNoiseSd, rng);
  const Outcome out = outcome(patient.trajectory, patient.x, patient.tau);
  patient.o = out.o;
  patient.y = out.y;
}

ObservedPatient observe(const PatientRecord& patient) {
  ObservedPatient obs;
  obs.id = patient.id;
  obs.x = patient.x;
  obs.y = patient.y;
  const std::size_t T = patient.observed_steps();
  obs.history.e0 = patient.e0;
  obs.history.burden.assign(patient.trajectory.burden.begin(),
                            patient.trajectory.burden.begin() + static_cast<std::ptrdiff_t>(T));
  for (const auto& z : patient.trajectory.dose) {
    obs.history.dose.emplace_back(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(T));
  }
  return obs;
}

Cohort generate_cohort(const SimSetup& setup, std::size_t jobs) {
  setup.validate();
  Cohort c;
  c.setup = setup;
  c.oracle.resize(setup.n);
  c.observed.resize(setup.n);
  parallel_for(setup.n, jobs, [&](std::size_t i) {
    Rng rng = Rng::substream(setup.seed, Stream::patient, i);
    c.oracle[i] = sample_patient(setup, i, rng);
    simulate_patient(setup, c.oracle[i]);
    c.observed[i] = observe(c.oracle[i]);
  });
  return c;
}

void write_cohort(const Cohort& cohort, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  using csv::format_double;
  const SimSetup& s = cohort.setup;

  csv::Table patients;
  patients.header = {"id", "T", "Y", "E0"};
  for (std::size_t j = 1; j <= s.p; ++j) patients.header.push_back("X" + std::to_string(j));
  csv::Table steps;
  steps.header = {"id", "t", "E", "Z"};
  for (const auto& o : cohort.observed) {
    csv::Row row{std::to_string(o.id), std::to_string(o.observed_steps()), std::to_string(o.y),
                 format_double(o.history.e0)};
    for (double v : o.x) row.push_back(format_double(v));
    patients.rows.push_back(std::move(row));
    for (std::size_t t = 0; t < o.observed_steps(); ++t) {
      steps.rows.push_back({std::to_string(o.id), std::to_string(t + 1),
                            format_double(o.history.burden[t]),
                            format_double(o.history.dose[0][t])});
    }
  }

  csv::Table oracle;
  oracle.header = {"id",   "tau",  "missing", "beta",        "gamma",
                   "alpha", "ed50", "o",       "y",           "policy_type", "policy"};
  csv::Table oracle_steps;
  oracle_steps.header = {"id", "t", "E", "Z", "D"};
  for (const auto& r : cohort.oracle) {
    const auto& d = r.params.drugs.front();
    const bool informed = s.policy_mode == PolicyMode::informed;
    oracle.rows.push_back({std::to_string(r.id), std::to_string(r.tau), std::to_string(r.missing),
                           format_double(r.params.beta), format_double(d.gamma),
                           format_double(d.alpha), format_double(d.ed50), format_double(r.o),
                           std::to_string(r.y), std::string(policy::policy_type_name(r.policy_type)),
                           informed ? policy::serialize(r.assigned_policy) : std::string("random")});
    for (std::size_t t = 0; t < r.tau; ++t) {
      oracle_steps.rows.push_back({std::to_string(r.id), std::to_string(t + 1),
                                   format_double(r.trajectory.burden[t]),
                                   format_double(r.trajectory.dose[0][t]),
                                   format_double(r.trajectory.conc[0][t])});
    }
  }

  csv::write_atomic(dir / "observed_patients.csv", patients);
  csv::write_atomic(dir / "observed_steps.csv", steps);
  csv::write_atomic(dir / "oracle_patients.csv", oracle);
  csv::write_atomic(dir / "oracle_steps.csv", oracle_steps);

  std::ostringstream meta;
  meta << "n = " << s.n << '\n'
       << "p = " << s.p << '\n'
       << "horizon = " << (s.horizon == HorizonMode::two_steps ? "two_steps" : "ten_to_fifteen")
       << '\n'
       << "missing = " << (s.missing == MissingMode::none ? "none" : "variable") << '\n'
       << "action = " << action_name(s.action) << '\n'
       << "policy_mode = " << (s.policy_mode == PolicyMode::random ? "random" : "informed") << '\n'
       << "seed = " << s.seed << '\n'
       << "rng = " << kRngAlgorithm << '\n';
  csv::write_text_atomic(dir / "meta.txt", meta.str());
}

std::vector<ObservedPatient> read_observed(const std::filesystem::path& dir) {
  const csv::Table patients = csv::read(dir / "observed_patients.csv");
  const csv::Table steps = csv::read(dir / "observed_steps.csv");
  std::vector<ObservedPatient> out;
  std::map<std::size_t, std::size_t> index;
  const std::size_t x_start = patients.column("E0") + 1;
  for (const auto& row : patients.rows) {
    ObservedPatient o;
    o.id = std::stoul(row[patients.column("id")]);
    o.y = std::stoi(row[patients.column("Y")]);
    o.history.e0 = std::stod(row[patients.column("E0")]);
    o.history.dose.assign(1, {});
    for (std::size_t j = x_start; j < row.size(); ++j) o.x.push_back(std::stod(row[j]));
    index[o.id] = out.size();
    out.push_back(std::move(o));
  }
  const std::size_t id_col = steps.column("id");
  const std::size_t e_col = steps.column("E");
  const std::size_t z_col = steps.column("Z");
  for (const auto& row : steps.rows) {
    auto& o = out.at(index.at(std::stoul(row[id_col])));
    o.history.burden.push_back(std::stod(row[e_col]));
    o.history.dose[0].push_back(std::stod(row[z_col]));
  }
  return out;
}

}  // namespace regimen::cohort
