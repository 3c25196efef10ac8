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

#include "regimen/policy.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

#include "regimen/linear_model.hpp"
#include "regimen/simd/kernels.hpp"

namespace regimen::policy {

namespace {

double ind(bool b) { return b ? 1.0 : 0.0; }

// Rows: zeta_1..zeta_10. Columns: aggressive, moderate, conservative.
constexpr double kContinuousMeans[10][3] = {
    {10, 0, 0},   {10, 0, 0},   {20, 10, 0},  {20, 10, 0},  {20, 20, 10},
    {20, 20, 20}, {0, -10, -10}, {0, -20, -20}, {20, 20, 20}, {0, -20, -20},
};
constexpr double kBinaryMeans[10][3] = {
    {0, 0, 0}, {50, 0, 0}, {0, 0, 0}, {0, 0, 0},   {0, 50, 50},
    {0, 0, 0}, {0, 0, -50}, {0, 0, 0}, {0, 0, 0},   {0, 0, 0},
};

double mean_burden(const HistoryView& h, std::size_t window) {
  const std::size_t t = h.t();
  const std::size_t first = t > window ? t - window : 0;
  double sum = 0.0;
  for (std::size_t s = first; s < t; ++s) sum += h.burden_at(s);
  return sum / static_cast<double>(t - first);
}

double dose_total(const HistoryView& h, std::size_t drug, std::size_t window) {
  const std::size_t t = h.t();
  const std::size_t first = t > window ? t - window : 1;
  double sum = 0.0;
  for (std::size_t s = std::max<std::size_t>(first, 1); s < t; ++s) sum += h.dose_at(drug, s);
  return sum;
}

// Shared body of the propofol and levetiracetam templates.
std::array<double, 7> clinical_indicators(const HistoryView& h, const TemplateClock& clock) {
  const double e1 = mean_burden(h, clock.window_steps(1.0));
  const double e6 = mean_burden(h, clock.window_steps(6.0));
  const double e12 = mean_burden(h, clock.window_steps(12.0));
  return {ind(e1 > 25.0), ind(e1 > 50.0), ind(e1 > 75.0), ind(e6 > 25.0), ind(e6 > 50.0),
          ind(e1 > 25.0) * ind(e6 > 25.0), ind(e6 > 25.0) * ind(e12 > 25.0)};
}

void require_same_shape(const PolicyParams& a, const PolicyParams& b) {
  if (a.template_id != b.template_id) throw std::invalid_argument("policy: mixed templates");
  if (!(a.action_space == b.action_space)) throw std::invalid_argument("policy: mixed action spaces");
  if (a.drug_slot != b.drug_slot) throw std::invalid_argument("policy: mixed drug slots");
  if (a.coeffs.size() != b.coeffs.size()) throw std::invalid_argument("policy: coefficient length");
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(std::string_view s) {
  // std::from_chars for double round-trips exactly on libstdc++ >= 11.
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument("policy: bad number '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

std::string_view template_name(TemplateId id) {
  switch (id) {
    case TemplateId::synthetic10: return "synthetic10";
    case TemplateId::propofol: return "propofol";
    case TemplateId::levetiracetam: return "levetiracetam";
  }
  return "unknown";
}

TemplateId parse_template(std::string_view name) {
  if (name == "synthetic10") return TemplateId::synthetic10;
  if (name == "propofol") return TemplateId::propofol;
  if (name == "levetiracetam") return TemplateId::levetiracetam;
  throw std::invalid_argument("policy: unknown template '" + std::string(name) + "'");
}

std::size_t coeff_count(TemplateId id) {
  switch (id) {
    case TemplateId::synthetic10: return 10;
    case TemplateId::propofol: return 7;
    case TemplateId::levetiracetam: return 8;
  }
  return 0;
}

double ActionSpace::project(double s) const {
  if (kind == Kind::binary) return s > 25.0 ? 50.0 : 0.0;
  return std::clamp(s, lo, hi);
}

bool ActionSpace::contains(double dose) const {
  if (kind == Kind::binary) return dose == 0.0 || dose == 50.0;
  return dose >= lo && dose <= hi;
}

std::size_t TemplateClock::window_steps(double hours) const {
  const double steps = std::round(hours * steps_per_hour);
  return steps < 1.0 ? 1 : static_cast<std::size_t>(steps);
}

std::array<double, 10> features_synthetic10(const HistoryView& h) {
  const std::size_t t = h.t();
  const double e = h.burden_at(t - 1);
  const double z = h.dose_at(0, t - 1);
  double rolling_e = 0.0;
  double rolling_z = 0.0;
  const bool long_enough = t >= 3;
  if (long_enough) {
    for (std::size_t s = t - 3; s < t; ++s) {
      rolling_e += h.burden_at(s);
      rolling_z += h.dose_at(0, s);
    }
    rolling_e /= 3.0;
    rolling_z /= 3.0;
  }
  return {ind(e > 10), ind(e > 20), ind(e > 30), ind(e > 40), ind(e > 60), ind(e > 80),
          ind(z > 25), ind(z > 50),
          ind(long_enough) * ind(e > 40) * ind(rolling_e > 20),
          ind(long_enough) * ind(z > 40) * ind(rolling_z > 20)};
}

FeatureRow template_features(TemplateId id, const HistoryView& h, std::size_t drug_slot,
                             const TemplateClock& clock) {
  FeatureRow row;
  switch (id) {
    case TemplateId::synthetic10: {
      const auto f = features_synthetic10(h);
      row.values.assign(f.begin(), f.end());
      break;
    }
    case TemplateId::propofol: {
      const auto f = clinical_indicators(h, clock);
      row.values.assign(f.begin(), f.end());
      break;
    }
    case TemplateId::levetiracetam: {
      const auto f = clinical_indicators(h, clock);
      row.values.reserve(8);
      row.values.push_back(1.0);
      row.values.insert(row.values.end(), f.begin(), f.end());
      row.gate = ind(dose_total(h, drug_slot, clock.window_steps(12.0)) == 0.0);
      break;
    }
  }
  return row;
}

double score(const PolicyParams& policy, const FeatureRow& features) {
  if (policy.coeffs.size() != features.values.size()) {
    throw std::invalid_argument("policy: feature/coefficient length mismatch");
  }
  if (features.gate == 0.0) return 0.0;
  return features.gate * simd::dot(policy.coeffs, features.values);
}

double evaluate(const PolicyParams& policy, const FeatureRow& features) {
  return policy.action_space.project(score(policy, features));
}

PolicyParams add(const PolicyParams& a, const PolicyParams& b) {
  require_same_shape(a, b);
  PolicyParams out = a;
  for (std::size_t j = 0; j < out.coeffs.size(); ++j) out.coeffs[j] += b.coeffs[j];
  return out;
}

PolicyParams combine(std::span<const PolicyParams> policies, std::span<const double> weights) {
  if (policies.empty()) throw std::invalid_argument("policy: combine of nothing");
  if (policies.size() != weights.size()) throw std::invalid_argument("policy: weight count");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("policy: negative weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("policy: weights must sum to 1");
  PolicyParams out = policies.front();
  std::fill(out.coeffs.begin(), out.coeffs.end(), 0.0);
  for (std::size_t k = 0; k < policies.size(); ++k) {
    require_same_shape(out, policies[k]);
    simd::axpy(weights[k], policies[k].coeffs, out.coeffs);
  }
  return out;
}

std::string_view policy_type_name(PolicyType type) {
  switch (type) {
    case PolicyType::aggressive: return "aggressive";
    case PolicyType::moderate: return "moderate";
    case PolicyType::conservative: return "conservative";
  }
  return "unknown";
}

std::array<double, 3> type_probabilities(std::span<const double> x) {
  if (x.size() < 4) throw std::invalid_argument("policy: need at least 4 covariates");
  const double logits[3] = {(x[0] + x[1]) / 2.0, 0.0, (x[2] + x[3]) / 2.0};
  const double top = std::max({logits[0], logits[1], logits[2]});
  std::array<double, 3> p{};
  double z = 0.0;
  for (int k = 0; k < 3; ++k) z += (p[k] = std::exp(logits[k] - top));
  for (double& v : p) v /= z;
  return p;
}

PolicyType draw_policy_type(std::span<const double> x, Rng& rng) {
  const auto p = type_probabilities(x);
  const double u = rng.uniform();
  if (u < p[0]) return PolicyType::aggressive;
  if (u < p[0] + p[1]) return PolicyType::moderate;
  return PolicyType::conservative;
}

std::array<double, 10> informed_coefficient_means(PolicyType type, ActionSpace::Kind kind) {
  const auto col = static_cast<int>(type);
  std::array<double, 10> out{};
  for (int j = 0; j < 10; ++j) {
    out[j] = kind == ActionSpace::Kind::binary ? kBinaryMeans[j][col] : kContinuousMeans[j][col];
  }
  return out;
}

PolicyParams make_informed_policy(PolicyType type, ActionSpace space, Rng* jitter) {
  const auto means = informed_coefficient_means(type, space.kind);
  PolicyParams p{TemplateId::synthetic10, {means.begin(), means.end()}, space, 0};
  if (jitter != nullptr && space.kind == ActionSpace::Kind::continuous) {
    for (double& c : p.coeffs) c += jitter->normal(0.0, 1.0);
  }
  return p;
}

DoseRule make_dose_rule(std::vector<PolicyParams> regime, DeviationSpec deviation,
                        TemplateClock clock) {
  if (regime.empty()) throw std::invalid_argument("policy: empty regime");
  return [regime = std::move(regime), deviation, clock](const HistoryView& h, Rng& rng,
                                                        std::span<double> out) {
    const bool deviate = deviation.probability > 0.0 && rng.bernoulli(deviation.probability);
    for (const PolicyParams& p : regime) {
      double dose;
      if (deviate) {
        if (p.action_space.kind == ActionSpace::Kind::binary) {
          dose = rng.uniform_int(0, 1) == 1 ? 50.0 : 0.0;
        } else {
          dose = p.action_space.project(rng.normal(h.burden_at(h.t() - 1), deviation.sd));
        }
      } else {
        dose = evaluate(p, template_features(p.template_id, h, p.drug_slot, clock));
      }
      out[p.drug_slot] = dose;
    }
  };
}

DoseRule make_random_rule(ActionSpace space, std::size_t drugs) {
  return [space, drugs](const HistoryView&, Rng& rng, std::span<double> out) {
    for (std::size_t d = 0; d < drugs; ++d) {
      out[d] = space.kind == ActionSpace::Kind::binary ? (rng.uniform_int(0, 1) == 1 ? 50.0 : 0.0)
                                                       : rng.uniform(space.lo, space.hi);
    }
  };
}

DoseRule make_constant_rule(double dose, std::size_t drugs) {
  return [dose, drugs](const HistoryView&, Rng&, std::span<double> out) {
    for (std::size_t d = 0; d < drugs; ++d) out[d] = dose;
  };
}

PolicyFit fit_policy(const Trajectory& observed, TemplateId id, ActionSpace space, double ridge,
                     std::size_t drug_slot, const TemplateClock& clock) {
  const std::size_t steps = observed.length();
  if (steps == 0) throw std::invalid_argument("fit_policy: no observed steps");
  if (drug_slot >= observed.drugs()) throw std::invalid_argument("fit_policy: no such drug");
  const std::size_t dim = coeff_count(id);

  std::vector<FeatureRow> rows;
  rows.reserve(steps);
  for (std::size_t t = 1; t <= steps; ++t) {
    rows.push_back(template_features(id, HistoryView(observed, t), drug_slot, clock));
  }
  const auto& doses = observed.dose[drug_slot];

  std::vector<std::size_t> active;
  for (std::size_t r = 0; r < steps; ++r) {
    if (rows[r].gate != 0.0) active.push_back(r);
  }

  PolicyFit fit;
  fit.policy = PolicyParams{id, std::vector<double>(dim, 0.0), space, drug_slot};
  fit.rows = steps;

  std::set<std::vector<double>> distinct;
  for (std::size_t r : active) distinct.insert(rows[r].values);
  fit.rank_deficient = distinct.size() < dim;

  if (!active.empty()) {
    Eigen::MatrixXd design(static_cast<Eigen::Index>(active.size()), static_cast<Eigen::Index>(dim));
    Eigen::VectorXd target(static_cast<Eigen::Index>(active.size()));
    for (std::size_t i = 0; i < active.size(); ++i) {
      const FeatureRow& row = rows[active[i]];
      for (std::size_t j = 0; j < dim; ++j) design(i, j) = row.gate * row.values[j];
      target(i) = doses[active[i]];
    }
    const bool all_zero = target.cwiseAbs().maxCoeff() == 0.0;
    if (!all_zero) {
      linalg::RidgeSolver solver(design, ridge);
      const Eigen::VectorXd coef = solver.solve(target);
      for (std::size_t j = 0; j < dim; ++j) fit.policy.coeffs[j] = coef(j);
    }
  }

  Eigen::VectorXd y(static_cast<Eigen::Index>(steps));
  Eigen::VectorXd yhat(static_cast<Eigen::Index>(steps));
  for (std::size_t r = 0; r < steps; ++r) {
    y(r) = doses[r];
    yhat(r) = score(fit.policy, rows[r]);
  }
  fit.r2 = linalg::r_squared(y, yhat, &fit.degenerate);
  return fit;
}

std::string serialize(const PolicyParams& policy) {
  std::string out(template_name(policy.template_id));
  out += '|';
  if (policy.action_space.kind == ActionSpace::Kind::binary) {
    out += "binary";
  } else {
    out += "continuous:" + format_double(policy.action_space.lo) + ':' +
           format_double(policy.action_space.hi);
  }
  out += '|' + std::to_string(policy.drug_slot) + '|';
  for (std::size_t j = 0; j < policy.coeffs.size(); ++j) {
    if (j) out += ',';
    out += format_double(policy.coeffs[j]);
  }
  return out;
}

PolicyParams parse_policy(std::string_view text) {
  const auto parts = split(text, '|');
  if (parts.size() != 4) throw std::invalid_argument("policy: expected 4 '|' fields");
  PolicyParams p;
  p.template_id = parse_template(parts[0]);
  const auto space = split(parts[1], ':');
  if (space.size() == 1 && space[0] == "binary") {
    p.action_space = ActionSpace::binary();
  } else if (space.size() == 3 && space[0] == "continuous") {
    p.action_space = ActionSpace::continuous(parse_double(space[1]), parse_double(space[2]));
  } else {
    throw std::invalid_argument("policy: bad action space '" + std::string(parts[1]) + "'");
  }
  const std::string slot(parts[2]);
  p.drug_slot = static_cast<std::size_t>(std::stoul(slot));
  if (!parts[3].empty()) {
    for (auto c : split(parts[3], ',')) p.coeffs.push_back(parse_double(c));
  }
  if (p.coeffs.size() != coeff_count(p.template_id)) {
    throw std::invalid_argument("policy: coefficient count does not match template");
  }
  return p;
}

}  // namespace regimen::policy
