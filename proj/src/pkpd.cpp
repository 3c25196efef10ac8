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

#include "regimen/pkpd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "regimen/nelder_mead.hpp"

namespace regimen::pkpd {

namespace {

double hill_fraction(double conc, const DrugParams& d) {
  if (conc <= 0.0) return 0.0;
  return 1.0 / (1.0 + std::pow(d.ed50 / conc, d.alpha));
}

std::vector<std::vector<double>> concentrations(const std::vector<std::vector<double>>& doses,
                                                std::span<const double> gammas) {
  std::vector<std::vector<double>> conc(doses.size());
  for (std::size_t j = 0; j < doses.size(); ++j) {
    conc[j].resize(doses[j].size());
    double c = 0.0;
    for (std::size_t t = 0; t < doses[j].size(); ++t) {
      c = pk_step(c, doses[j][t], gammas[j]);
      conc[j][t] = c;
    }
  }
  return conc;
}

}  // namespace

void PkPdParams::validate() const {
  if (!(beta > 0.0 && beta <= 200.0)) throw std::invalid_argument("pkpd: beta outside (0, 200]");
  if (drugs.empty()) throw std::invalid_argument("pkpd: no drugs");
  for (const auto& d : drugs) {
    if (!(d.gamma > 0.0 && d.alpha > 0.0 && d.ed50 > 0.0)) {
      throw std::invalid_argument("pkpd: drug parameters must be positive");
    }
  }
}

double gamma_from_half_life(double half_life_hours, double steps_per_hour) {
  if (!(half_life_hours > 0.0 && steps_per_hour > 0.0)) {
    throw std::invalid_argument("pkpd: half-life and step rate must be positive");
  }
  return std::numbers::ln2 / (half_life_hours * steps_per_hour);
}

double pk_step(double conc_prev, double dose, double gamma) {
  return std::exp(-gamma) * conc_prev + dose;
}

double pd_burden(std::span<const double> concs, const PkPdParams& params) {
  if (concs.size() != params.drugs.size()) throw std::invalid_argument("pkpd: drug count");
  double effect = 0.0;
  for (std::size_t j = 0; j < concs.size(); ++j) effect += hill_fraction(concs[j], params.drugs[j]);
  return std::clamp(params.beta * (1.0 - effect), 0.0, params.beta);
}

Trajectory simulate_trajectory(const PkPdParams& params, const DoseRule& rule, double e0,
                               std::size_t tau, double noise_sd, Rng& rng) {
  if (tau == 0) throw std::invalid_argument("simulate_trajectory: tau must be >= 1");
  if (!(e0 >= 0.0 && e0 <= params.beta)) {
    throw std::invalid_argument("simulate_trajectory: e0 outside [0, beta]");
  }
  const std::size_t drugs = params.drugs.size();
  Trajectory traj;
  traj.e0 = e0;
  traj.burden.reserve(tau);
  traj.dose.assign(drugs, {});
  traj.conc.assign(drugs, {});
  for (std::size_t j = 0; j < drugs; ++j) {
    traj.dose[j].reserve(tau);
    traj.conc[j].reserve(tau);
  }

  std::vector<double> next_dose(drugs, 0.0);
  std::vector<double> conc(drugs, 0.0);
  for (std::size_t t = 1; t <= tau; ++t) {
    std::fill(next_dose.begin(), next_dose.end(), 0.0);
    rule(HistoryView(traj, t), rng, next_dose);
    for (std::size_t j = 0; j < drugs; ++j) {
      const double z = std::max(0.0, next_dose[j]);
      conc[j] = pk_step(conc[j], z, params.drugs[j].gamma);
      traj.dose[j].push_back(z);
      traj.conc[j].push_back(conc[j]);
    }
    double e = pd_burden(conc, params);
    if (noise_sd > 0.0) e += rng.normal(0.0, noise_sd);
    traj.burden.push_back(std::clamp(e, 0.0, params.beta));
  }
  return traj;
}

Trajectory simulate_trajectory(const PkPdParams& params,
                               const std::vector<policy::PolicyParams>& regime, double e0,
                               std::size_t tau, double noise_sd,
                               const policy::DeviationSpec& deviation, Rng& rng) {
  return simulate_trajectory(params, policy::make_dose_rule(regime, deviation), e0, tau,
                             noise_sd, rng);
}

std::vector<double> predict_burden(const PkPdParams& params,
                                   const std::vector<std::vector<double>>& doses) {
  if (doses.size() != params.drugs.size()) throw std::invalid_argument("pkpd: drug count");
  std::vector<double> gammas;
  for (const auto& d : params.drugs) gammas.push_back(d.gamma);
  const auto conc = concentrations(doses, gammas);
  const std::size_t steps = doses.empty() ? 0 : doses.front().size();
  std::vector<double> out(steps);
  std::vector<double> c(doses.size());
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t j = 0; j < doses.size(); ++j) c[j] = conc[j][t];
    out[t] = pd_burden(c, params);
  }
  return out;
}

FitResult fit_pkpd(const Trajectory& observed, std::optional<std::vector<double>> fixed_gammas,
                   const FitOptions& options) {
  const std::size_t drugs = observed.drugs();
  const std::size_t steps = observed.length();
  if (drugs == 0) throw std::invalid_argument("fit_pkpd: no dose series");
  if (fixed_gammas && fixed_gammas->size() != drugs) {
    throw std::invalid_argument("fit_pkpd: one fixed gamma per drug required");
  }
  const bool free_gamma = !fixed_gammas.has_value();
  const std::size_t per_drug = free_gamma ? 3 : 2;
  const std::size_t dim = 1 + per_drug * drugs;
  if (steps < dim) throw std::invalid_argument("fit_pkpd: trajectory shorter than parameter count");

  FitResult result;
  bool any_dose = false;
  for (const auto& z : observed.dose) {
    for (double v : z) any_dose = any_dose || v > 0.0;
  }

  auto unpack = [&](std::span<const double> theta) {
    PkPdParams p;
    p.beta = std::exp(theta[0]);
    p.drugs.resize(drugs);
    std::size_t k = 1;
    for (std::size_t j = 0; j < drugs; ++j) {
      p.drugs[j].gamma = free_gamma ? std::exp(theta[k++]) : (*fixed_gammas)[j];
      p.drugs[j].alpha = std::exp(theta[k++]);
      p.drugs[j].ed50 = std::exp(theta[k++]);
    }
    return p;
  };
  auto pack = [&](const PkPdParams& p) {
    std::vector<double> theta{std::log(p.beta)};
    for (std::size_t j = 0; j < drugs; ++j) {
      if (free_gamma) theta.push_back(std::log(p.drugs[j].gamma));
      theta.push_back(std::log(p.drugs[j].alpha));
      theta.push_back(std::log(p.drugs[j].ed50));
    }
    return theta;
  };
  auto loss_of = [&](const PkPdParams& p) {
    const auto pred = predict_burden(p, observed.dose);
    double sse = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
      const double r = pred[t] - observed.burden[t];
      sse += r * r;
    }
    return sse / static_cast<double>(steps);
  };

  // Data-driven starting point.
  PkPdParams guess;
  guess.beta = std::clamp(*std::max_element(observed.burden.begin(), observed.burden.end()), 1.0,
                          150.0);
  guess.drugs.assign(drugs, DrugParams{});
  std::vector<double> g0(drugs, 1.0);
  if (fixed_gammas) g0 = *fixed_gammas;
  const auto conc0 = concentrations(observed.dose, g0);
  for (std::size_t j = 0; j < drugs; ++j) {
    std::vector<double> positive;
    for (double c : conc0[j]) {
      if (c > 0.0) positive.push_back(c);
    }
    guess.drugs[j].gamma = g0[j];
    if (!positive.empty()) {
      std::nth_element(positive.begin(), positive.begin() + positive.size() / 2, positive.end());
      guess.drugs[j].ed50 = std::max(positive[positive.size() / 2], 1e-3);
    }
  }
  if (options.initial) {
    guess = *options.initial;
    if (fixed_gammas) {
      for (std::size_t j = 0; j < drugs; ++j) guess.drugs[j].gamma = (*fixed_gammas)[j];
    }
  }

  if (!any_dose) {
    // Without drug the burden is flat at beta; the Hill parameters are not
    // identified and stay at the starting point.
    double mean = 0.0;
    for (double e : observed.burden) mean += e;
    result.params = guess;
    result.params.beta = std::clamp(mean / static_cast<double>(steps), 1e-9, 200.0);
    result.loss = loss_of(result.params);
    result.converged = true;
    result.degenerate = true;
    return result;
  }

  const optim::Objective objective = [&](std::span<const double> theta) {
    for (double v : theta) {
      if (!(std::abs(v) < 25.0)) return std::numeric_limits<double>::infinity();
    }
    if (theta[0] > std::log(200.0)) return std::numeric_limits<double>::infinity();
    return loss_of(unpack(theta));
  };

  optim::NelderMeadOptions nm;
  nm.f_tolerance = options.tolerance;
  nm.max_evaluations = options.max_evaluations;
  const std::vector<double> step(dim, 0.3);

  Rng rng = Rng::substream(options.seed, Stream::fit_restart, 0);
  const std::vector<double> base = pack(guess);
  result.loss = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < std::max<std::size_t>(options.restarts, 1); ++r) {
    std::vector<double> start = base;
    if (r > 0) {
      for (double& v : start) v += rng.normal(0.0, 0.5);
    }
    const auto run = optim::nelder_mead(objective, start, step, nm);
    if (run.value < result.loss) {
      result.loss = run.value;
      result.params = unpack(run.x);
      result.converged = run.converged;
    }
  }
  return result;
}

}  // namespace regimen::pkpd
