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

#include "regimen/baselines.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include "regimen/csv.hpp"
#include "regimen/linear_model.hpp"
#include "regimen/policy.hpp"

namespace regimen::baselines {

namespace {

using Eigen::Index;

constexpr double kPropensityFloor = 0.01;

Index idx(std::size_t i) { return static_cast<Index>(i); }

std::size_t state_dim(std::size_t covariates) { return covariates + 3; }

std::size_t phi_dim(std::size_t covariates, DoseGrid grid) {
  return state_dim(covariates) * grid.levels().size() + 1;
}

void fill_phi(std::span<const double> s, std::size_t level, double propensity,
              Eigen::Ref<Eigen::VectorXd> out) {
  const std::size_t d = s.size();
  out.setZero();
  for (std::size_t j = 0; j < d; ++j) out[idx(j)] = s[j];
  if (level > 0) {
    for (std::size_t j = 0; j < d; ++j) out[idx(level * d + j)] = s[j];
  }
  out[out.size() - 1] = propensity;
}

// Linear-probability propensity model: one ridge regression per dose level.
Eigen::MatrixXd fit_propensity(const Eigen::MatrixXd& states, const std::vector<std::size_t>& level,
                               std::size_t levels, double ridge, bool* fallback) {
  const linalg::RidgeSolver solver(states, ridge);
  if (solver.used_fallback()) *fallback = true;
  Eigen::MatrixXd coef(idx(levels), states.cols());
  for (std::size_t a = 0; a < levels; ++a) {
    Eigen::VectorXd target(states.rows());
    for (Index i = 0; i < states.rows(); ++i) target[i] = level[static_cast<std::size_t>(i)] == a;
    coef.row(idx(a)) = solver.solve(target).transpose();
  }
  return coef;
}

struct Transition {
  std::vector<double> s;
  std::size_t level;
};

Eigen::MatrixXd build_design(const std::vector<Transition>& rows, const StageModel& stage,
                             std::size_t dim) {
  Eigen::MatrixXd phi(idx(rows.size()), idx(dim));
  Eigen::VectorXd buf(idx(dim));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto p = stage.propensities(rows[i].s);
    fill_phi(rows[i].s, rows[i].level, p[rows[i].level], buf);
    phi.row(idx(i)) = buf.transpose();
  }
  return phi;
}

Eigen::MatrixXd state_matrix(const std::vector<Transition>& rows) {
  Eigen::MatrixXd m(idx(rows.size()), idx(rows.front().s.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].s.size(); ++j) m(idx(i), idx(j)) = rows[i].s[j];
  }
  return m;
}

double max_q(const StageModel& stage, std::span<const double> s, std::size_t levels) {
  const auto p = stage.propensities(s);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < levels; ++a) best = std::max(best, stage.q(s, a, p[a]));
  return best;
}

void require_data(std::span<const cohort::ObservedPatient> data) {
  if (data.empty()) throw std::invalid_argument("baseline: empty dataset");
  const std::size_t p = data.front().x.size();
  for (const auto& d : data) {
    if (d.x.size() != p) throw std::invalid_argument("baseline: covariate count differs");
    if (d.history.drugs() != 1) throw std::invalid_argument("baseline: single-drug data only");
  }
}

}  // namespace

std::vector<double> DoseGrid::levels() const {
  if (kind == Kind::binary) return {0.0, 50.0};
  return {0.0, 25.0, 50.0, 75.0, 100.0};
}

std::size_t DoseGrid::index(double dose) const {
  const double snapped = snap_dose(dose, *this);
  return kind == Kind::binary ? (snapped > 0.0 ? 1 : 0) : static_cast<std::size_t>(snapped / 25.0);
}

std::string_view grid_name(DoseGrid grid) {
  return grid.kind == DoseGrid::Kind::binary ? "binary" : "five_level";
}

DoseGrid parse_grid(std::string_view name) {
  if (name == "binary") return DoseGrid::binary();
  if (name == "five_level") return DoseGrid::five_level();
  throw std::invalid_argument("unknown dose grid: " + std::string(name));
}

double snap_dose(double dose, DoseGrid grid) {
  if (grid.kind == DoseGrid::Kind::binary) return dose > 25.0 ? 50.0 : 0.0;
  int n = 0;
  for (double th : {12.5, 37.5, 62.5, 87.5}) n += dose > th ? 1 : 0;
  return 25.0 * n;
}

DoseRule preset_policy(Preset kind, const cohort::SimSetup& setup,
                       const cohort::PatientRecord& patient) {
  const auto space = setup.action_space();
  switch (kind) {
    case Preset::inaction: return policy::make_constant_rule(0.0);
    case Preset::full_dosing: return policy::make_constant_rule(space.hi);
    case Preset::random: return policy::make_random_rule(space);
    case Preset::expert:
      return policy::make_dose_rule(
          {policy::make_informed_policy(patient.policy_type, space, nullptr)});
  }
  throw std::invalid_argument("unknown preset");
}

std::vector<double> state_features(const HistoryView& h, std::span<const double> x, DoseGrid grid) {
  std::vector<double> s;
  s.reserve(x.size() + 3);
  s.push_back(1.0);
  s.insert(s.end(), x.begin(), x.end());
  const std::size_t prev = h.t() - 1;
  s.push_back(h.burden_at(prev) / 100.0);
  s.push_back(snap_dose(h.dose_at(0, prev), grid) / 100.0);
  return s;
}

std::vector<double> StageModel::propensities(std::span<const double> s) const {
  std::vector<double> p(static_cast<std::size_t>(propensity.rows()));
  double total = 0.0;
  for (Index a = 0; a < propensity.rows(); ++a) {
    double v = 0.0;
    for (Index j = 0; j < propensity.cols(); ++j) v += propensity(a, j) * s[static_cast<std::size_t>(j)];
    v = std::clamp(v, kPropensityFloor, 1.0);
    p[static_cast<std::size_t>(a)] = v;
    total += v;
  }
  for (double& v : p) v /= total;
  return p;
}

double StageModel::q(std::span<const double> s, std::size_t level, double propensity_value) const {
  const std::size_t d = s.size();
  double v = propensity_value * coef[coef.size() - 1];
  for (std::size_t j = 0; j < d; ++j) {
    v += s[j] * coef[idx(j)];
    if (level > 0) v += s[j] * coef[idx(level * d + j)];
  }
  return v;
}

std::size_t QPolicy::greedy_level(const HistoryView& h, std::span<const double> x) const {
  if (stages.empty()) throw std::logic_error("QPolicy: no stage models");
  const StageModel& stage = stages[std::min(h.t(), stages.size()) - 1];
  const auto s = state_features(h, x, grid);
  const auto p = stage.propensities(s);
  std::size_t best = 0;
  double best_q = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < p.size(); ++a) {
    const double q = stage.q(s, a, p[a]);
    if (q > best_q) {  // ties keep the lower dose
      best_q = q;
      best = a;
    }
  }
  return best;
}

DoseRule QPolicy::rule(std::vector<double> x) const {
  return [self = *this, x = std::move(x), levels = grid.levels()](
             const HistoryView& h, Rng&, std::span<double> out) {
    out[0] = levels[self.greedy_level(h, x)];
  };
}

QPolicy q_backward(std::span<const cohort::ObservedPatient> data, const QOptions& options) {
  require_data(data);
  std::size_t horizon = std::numeric_limits<std::size_t>::max();
  for (const auto& d : data) horizon = std::min(horizon, d.observed_steps());
  if (horizon == 0) throw std::invalid_argument("q_backward: a patient has no observed step");

  QPolicy out;
  out.grid = options.grid;
  out.covariates = data.front().x.size();
  out.stages.resize(horizon);
  const std::size_t levels = options.grid.levels().size();
  const std::size_t dim = phi_dim(out.covariates, options.grid);

  // Stage values: -Y at the last common step, then the greedy continuation.
  Eigen::VectorXd value(idx(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) value[idx(i)] = -static_cast<double>(data[i].y);

  for (std::size_t t = horizon; t >= 1; --t) {
    std::vector<Transition> rows(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      const HistoryView h(data[i].history, t);
      rows[i] = {state_features(h, data[i].x, options.grid),
                 options.grid.index(data[i].history.dose[0][t - 1])};
    }
    StageModel& stage = out.stages[t - 1];
    {
      std::vector<std::size_t> level(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) level[i] = rows[i].level;
      const Eigen::MatrixXd states = state_matrix(rows);
      stage.propensity = fit_propensity(states, level, levels, options.ridge, &out.ridge_fallback);
    }
    const Eigen::MatrixXd phi = build_design(rows, stage, dim);
    const linalg::RidgeSolver solver(phi, options.ridge);
    out.ridge_fallback = out.ridge_fallback || solver.used_fallback();
    stage.coef = solver.solve(value);
    if (t > 1) {
      for (std::size_t i = 0; i < data.size(); ++i) value[idx(i)] = max_q(stage, rows[i].s, levels);
    }
  }
  return out;
}

std::vector<double> observed_rewards(const cohort::ObservedPatient& patient,
                                     cohort::RewardKind kind) {
  const auto& h = patient.history;
  std::vector<double> r(h.length());
  double conc = 0.0;
  for (std::size_t t = 1; t <= h.length(); ++t) {
    const double z = h.dose[0][t - 1];
    conc = pkpd::pk_step(conc, z, 1.0);
    const double e_prev = t == 1 ? h.e0 : h.burden[t - 2];
    r[t - 1] = cohort::reward(kind, e_prev, h.burden[t - 1], z, conc, patient.x);
  }
  return r;
}

QPolicy fitted_q_iteration(std::span<const cohort::ObservedPatient> data, const FqiOptions& options) {
  require_data(data);
  if (!(options.discount >= 0.0 && options.discount < 1.0)) {
    throw std::invalid_argument("fitted_q_iteration: discount must lie in [0, 1)");
  }
  QPolicy out;
  out.grid = options.grid;
  out.covariates = data.front().x.size();
  const std::size_t levels = options.grid.levels().size();
  const std::size_t dim = phi_dim(out.covariates, options.grid);

  std::vector<Transition> rows;
  std::vector<std::vector<double>> next_state;
  std::vector<double> rewards;
  for (const auto& d : data) {
    const auto r = observed_rewards(d, options.reward);
    for (std::size_t t = 1; t <= d.observed_steps(); ++t) {
      const HistoryView h(d.history, t);
      rows.push_back({state_features(h, d.x, options.grid),
                      options.grid.index(d.history.dose[0][t - 1])});
      // The state after the last observed step is still observable.
      const HistoryView next(d.history, t + 1);
      next_state.push_back(state_features(next, d.x, options.grid));
      rewards.push_back(r[t - 1]);
    }
  }
  if (rows.empty()) throw std::invalid_argument("fitted_q_iteration: no transitions");

  StageModel stage;
  {
    std::vector<std::size_t> level(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) level[i] = rows[i].level;
    stage.propensity =
        fit_propensity(state_matrix(rows), level, levels, options.ridge, &out.ridge_fallback);
  }
  const Eigen::MatrixXd phi = build_design(rows, stage, dim);
  const linalg::RidgeSolver solver(phi, options.ridge);
  out.ridge_fallback = out.ridge_fallback || solver.used_fallback();

  // Next-state design blocks, one per candidate action, built once.
  std::vector<Eigen::MatrixXd> next_phi(levels, Eigen::MatrixXd(idx(rows.size()), idx(dim)));
  Eigen::VectorXd buf(idx(dim));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto p = stage.propensities(next_state[i]);
    for (std::size_t a = 0; a < levels; ++a) {
      fill_phi(next_state[i], a, p[a], buf);
      next_phi[a].row(idx(i)) = buf.transpose();
    }
  }

  const Eigen::Map<const Eigen::VectorXd> r(rewards.data(), idx(rewards.size()));
  stage.coef = Eigen::VectorXd::Zero(idx(dim));
  for (std::size_t it = 0; it < options.iterations; ++it) {
    Eigen::VectorXd best = next_phi[0] * stage.coef;
    for (std::size_t a = 1; a < levels; ++a) best = best.cwiseMax(next_phi[a] * stage.coef);
    stage.coef = solver.solve(r + options.discount * best);
    const double peak = (phi * stage.coef).cwiseAbs().maxCoeff();
    if (!(peak <= options.divergence_limit)) {
      throw Diverged("fitted_q_iteration: max |Q| = " + csv::format_double(peak) +
                     " exceeds the limit at iteration " + std::to_string(it + 1));
    }
  }
  out.stages.push_back(std::move(stage));
  return out;
}

std::string serialize(const QPolicy& policy) {
  std::string s = "tabular-greedy|" + std::string(grid_name(policy.grid)) + "|" +
                  std::to_string(policy.covariates) + "|" + std::to_string(policy.stages.size()) +
                  "|";
  for (std::size_t k = 0; k < policy.stages.size(); ++k) {
    if (k) s += ';';
    const auto& st = policy.stages[k];
    for (Index j = 0; j < st.coef.size(); ++j) {
      if (j) s += ',';
      s += csv::format_double(st.coef[j]);
    }
    s += '/';
    for (Index a = 0; a < st.propensity.rows(); ++a) {
      for (Index j = 0; j < st.propensity.cols(); ++j) {
        if (a || j) s += ',';
        s += csv::format_double(st.propensity(a, j));
      }
    }
  }
  return s;
}

namespace {

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    out.push_back(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<double> parse_numbers(std::string_view text) {
  std::vector<double> out;
  for (auto tok : split(text, ',')) {
    double v = 0.0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
      throw std::invalid_argument("parse_qpolicy: bad number '" + std::string(tok) + "'");
    }
    out.push_back(v);
  }
  return out;
}

std::size_t parse_count(std::string_view tok) {
  std::size_t v = 0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw std::invalid_argument("parse_qpolicy: bad count '" + std::string(tok) + "'");
  }
  return v;
}

}  // namespace

QPolicy parse_qpolicy(std::string_view text) {
  const auto parts = split(text, '|');
  if (parts.size() != 5 || parts[0] != "tabular-greedy") {
    throw std::invalid_argument("parse_qpolicy: not a tabular-greedy policy");
  }
  QPolicy p;
  p.grid = parse_grid(parts[1]);
  p.covariates = parse_count(parts[2]);
  const std::size_t stages = parse_count(parts[3]);
  const std::size_t dim = phi_dim(p.covariates, p.grid);
  const std::size_t levels = p.grid.levels().size();
  const std::size_t sdim = state_dim(p.covariates);
  const auto blocks = split(parts[4], ';');
  if (blocks.size() != stages) throw std::invalid_argument("parse_qpolicy: stage count");
  for (auto block : blocks) {
    const auto halves = split(block, '/');
    if (halves.size() != 2) throw std::invalid_argument("parse_qpolicy: stage layout");
    const auto coef = parse_numbers(halves[0]);
    const auto prop = parse_numbers(halves[1]);
    if (coef.size() != dim || prop.size() != levels * sdim) {
      throw std::invalid_argument("parse_qpolicy: stage size");
    }
    StageModel st;
    st.coef = Eigen::Map<const Eigen::VectorXd>(coef.data(), idx(dim));
    st.propensity.resize(idx(levels), idx(sdim));
    for (std::size_t a = 0; a < levels; ++a) {
      for (std::size_t j = 0; j < sdim; ++j) st.propensity(idx(a), idx(j)) = prop[a * sdim + j];
    }
    p.stages.push_back(std::move(st));
  }
  return p;
}

}  // namespace regimen::baselines
