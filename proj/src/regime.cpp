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

#include "regimen/regime.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "regimen/csv.hpp"
#include "regimen/linear_model.hpp"
#include "regimen/pkpd.hpp"
#include "regimen/simd/kernels.hpp"

namespace regimen::regime {

std::string_view mode_name(Mode mode) {
  return mode == Mode::uniform ? "uniform" : "simplex_search";
}

Mode parse_mode(std::string_view name) {
  if (name == "uniform") return Mode::uniform;
  if (name == "simplex_search") return Mode::simplex_search;
  throw std::invalid_argument("unknown regime mode: " + std::string(name));
}

std::vector<double> project_to_simplex(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("project_to_simplex: empty vector");
  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<>());
  double prefix = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    prefix += u[j];
    const double t = (prefix - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  std::vector<double> w(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) w[i] = std::max(v[i] - theta, 0.0);
  return w;
}

double ValueModel::operator()(std::span<const double> theta) const {
  return intercept + simd::dot(slope, theta);
}

ValueModel fit_value_model(std::span<const policy::PolicyParams> policies,
                           std::span<const double> y, double ridge) {
  if (policies.empty() || policies.size() != y.size()) {
    throw std::invalid_argument("fit_value_model: need one outcome per policy");
  }
  const std::size_t n = policies.size();
  const std::size_t dim = policies.front().coeffs.size();
  ValueModel model;
  model.slope.assign(dim, 0.0);

  double ymean = 0.0;
  for (double v : y) ymean += v;
  ymean /= static_cast<double>(n);
  model.intercept = ymean;

  const bool flat = std::all_of(y.begin(), y.end(), [&](double v) { return v == y.front(); });
  std::set<std::vector<double>> distinct;
  for (const auto& p : policies) distinct.insert(p.coeffs);
  if (flat || distinct.size() < dim + 1) {
    model.degenerate = true;
    return model;
  }

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  for (const auto& p : policies) {
    for (std::size_t j = 0; j < dim; ++j) mean[static_cast<Eigen::Index>(j)] += p.coeffs[j];
  }
  mean /= static_cast<double>(n);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  Eigen::VectorXd target(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          policies[i].coeffs[j] - mean[static_cast<Eigen::Index>(j)];
    }
    target[static_cast<Eigen::Index>(i)] = y[i] - ymean;
  }
  const linalg::RidgeSolver solver(x, ridge);
  const Eigen::VectorXd b = solver.solve(target);
  model.degenerate = solver.used_fallback();
  for (std::size_t j = 0; j < dim; ++j) model.slope[j] = b[static_cast<Eigen::Index>(j)];
  model.intercept = ymean - b.dot(mean);
  return model;
}

std::vector<double> minimize_on_simplex(const ValueModel& model,
                                        std::span<const policy::PolicyParams> vertices,
                                        const SimplexSearchOptions& options) {
  const std::size_t k = vertices.size();
  if (k == 0) throw std::invalid_argument("minimize_on_simplex: no vertices");
  // The value is linear in the weights: nu(c) = intercept + sum_k c_k g_k.
  std::vector<double> g(k);
  for (std::size_t i = 0; i < k; ++i) g[i] = simd::dot(model.slope, vertices[i].coeffs);
  auto value = [&](const std::vector<double>& c) {
    double v = model.intercept;
    for (std::size_t i = 0; i < k; ++i) v += c[i] * g[i];
    return v;
  };

  std::vector<std::vector<double>> starts;
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<double> e(k, 0.0);
    e[i] = 1.0;
    starts.push_back(std::move(e));
  }
  starts.emplace_back(k, 1.0 / static_cast<double>(k));

  std::vector<double> best;
  double best_value = std::numeric_limits<double>::infinity();
  std::vector<double> step(k);
  for (auto c : starts) {
    for (std::size_t it = 0; it < options.iterations; ++it) {
      for (std::size_t i = 0; i < k; ++i) step[i] = c[i] - options.step * g[i];
      c = project_to_simplex(step);
    }
    const double v = value(c);
    if (v < best_value) {
      best_value = v;
      best = std::move(c);
    }
  }
  return best;
}

namespace {

std::vector<policy::PolicyParams> gather(const matching::MatchedGroup& group,
                                         std::span<const policy::PolicyParams> policies) {
  std::vector<policy::PolicyParams> out;
  out.reserve(group.neighbors.size());
  for (const auto& n : group.neighbors) {
    if (n.id >= policies.size()) throw std::out_of_range("estimate_optimal: neighbour id");
    out.push_back(policies[n.id]);
  }
  return out;
}

}  // namespace

RegimeEstimate estimate_optimal(std::size_t center, const matching::MatchedGroup& matched_good,
                                const matching::MatchedGroup* context,
                                std::span<const policy::PolicyParams> policies,
                                std::span<const int> y, Mode mode,
                                const SimplexSearchOptions& options) {
  if (matched_good.neighbors.empty()) {
    throw std::invalid_argument("estimate_optimal: empty matched group");
  }
  const auto vertices = gather(matched_good, policies);
  const std::size_t k = vertices.size();

  RegimeEstimate est;
  est.patient = center;
  est.mode = mode;
  est.neighbors = matched_good.ids();
  est.weights.assign(k, 1.0 / static_cast<double>(k));

  if (mode == Mode::simplex_search) {
    if (context == nullptr) throw std::invalid_argument("estimate_optimal: context group required");
    const std::size_t dim = vertices.front().coeffs.size();
    if (context->neighbors.size() < dim + 1) {
      throw std::invalid_argument("estimate_optimal: context group smaller than dimension + 1");
    }
    const auto ctx = gather(*context, policies);
    std::vector<double> ctx_y;
    ctx_y.reserve(ctx.size());
    for (const auto& n : context->neighbors) ctx_y.push_back(static_cast<double>(y[n.id]));
    const ValueModel model = fit_value_model(ctx, ctx_y, options.ridge);
    if (model.degenerate) {
      est.fell_back = true;
    } else {
      est.weights = minimize_on_simplex(model, vertices, options);
    }
    est.policy = policy::combine(vertices, est.weights);
    if (!est.fell_back) est.value = model(est.policy.coeffs);
    return est;
  }
  est.policy = policy::combine(vertices, est.weights);
  return est;
}

Evaluation evaluate_regime(const DoseRule& rule, const cohort::PatientRecord& patient,
                           std::size_t rollouts, Rng& rng) {
  if (rollouts == 0) throw std::invalid_argument("evaluate_regime: rollouts must be positive");
  Evaluation sum;
  for (std::size_t r = 0; r < rollouts; ++r) {
    const Trajectory traj = pkpd::simulate_trajectory(patient.params, rule, patient.e0,
                                                      patient.tau, cohort::kBurdenNoiseSd, rng);
    const auto out = cohort::outcome(traj, patient.x, patient.tau);
    sum.o += out.o;
    sum.y += out.y;
  }
  sum.o /= static_cast<double>(rollouts);
  sum.y /= static_cast<double>(rollouts);
  return sum;
}

Evaluation evaluate_regime(const policy::PolicyParams& policy,
                           const cohort::PatientRecord& patient, std::size_t rollouts, Rng& rng) {
  return evaluate_regime(policy::make_dose_rule({policy}), patient, rollouts, rng);
}

std::vector<std::vector<double>> simplex_grid(std::size_t k, std::size_t steps) {
  if (k == 0 || steps == 0) throw std::invalid_argument("simplex_grid: k and steps must be positive");
  std::vector<std::vector<double>> out;
  std::vector<std::size_t> counts(k, 0);
  // Enumerate compositions of `steps` into k parts in lexicographic order.
  auto recurse = [&](auto&& self, std::size_t pos, std::size_t left) -> void {
    if (pos + 1 == k) {
      counts[pos] = left;
      std::vector<double> w(k);
      for (std::size_t i = 0; i < k; ++i) {
        w[i] = static_cast<double>(counts[i]) / static_cast<double>(steps);
      }
      out.push_back(std::move(w));
      return;
    }
    for (std::size_t c = 0; c <= left; ++c) {
      counts[pos] = c;
      self(self, pos + 1, left - c);
    }
  };
  recurse(recurse, 0, steps);
  return out;
}

GridOracle grid_oracle(std::span<const policy::PolicyParams> vertices,
                       const cohort::PatientRecord& patient, std::size_t steps,
                       std::size_t rollouts, std::uint64_t seed) {
  GridOracle best;
  bool have = false;
  for (const auto& w : simplex_grid(vertices.size(), steps)) {
    const auto pol = policy::combine(vertices, w);
    const auto rule = policy::make_dose_rule({pol});
    Evaluation sum;
    for (std::size_t r = 0; r < rollouts; ++r) {
      Rng rng = Rng::substream(seed, {static_cast<std::uint64_t>(Stream::evaluation), patient.id, r});
      const Evaluation e = evaluate_regime(rule, patient, 1, rng);
      sum.o += e.o;
      sum.y += e.y;
    }
    sum.o /= static_cast<double>(rollouts);
    sum.y /= static_cast<double>(rollouts);
    if (!have || sum.y < best.selected.y || (sum.y == best.selected.y && sum.o < best.selected.o)) {
      best.weights = w;
      best.selected = sum;
      have = true;
    }
  }
  return best;
}

void write_estimates_csv(const std::filesystem::path& path,
                         std::span<const RegimeEstimate> estimates) {
  csv::Table t;
  t.header = {"patient", "mode", "neighbors", "weights", "coefficients", "value"};
  auto join_list = [](const auto& values, auto fmt) {
    std::string s;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) s += ';';
      s += fmt(values[i]);
    }
    return s;
  };
  for (const auto& e : estimates) {
    t.rows.push_back({std::to_string(e.patient), std::string(mode_name(e.mode)),
                      join_list(e.neighbors, [](std::size_t v) { return std::to_string(v); }),
                      join_list(e.weights, csv::format_double),
                      join_list(e.policy.coeffs, csv::format_double),
                      e.value ? csv::format_double(*e.value) : std::string("NA")});
  }
  csv::write_atomic(path, t);
}

}  // namespace regimen::regime
