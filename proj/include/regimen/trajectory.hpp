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

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "regimen/rng.hpp"

namespace regimen {

/// State/action series for one patient. Index s in 1..T maps to element s-1;
/// the pre-treatment burden E_0 is stored separately and there is no dose or
/// concentration before step 1.
struct Trajectory {
  double e0 = 0.0;
  std::vector<double> burden;               // E_1..E_T, percent
  std::vector<std::vector<double>> dose;    // [drug][t], Z_1..Z_T
  std::vector<std::vector<double>> conc;    // [drug][t], D_1..D_T; may be empty when latent

  std::size_t length() const { return burden.size(); }
  std::size_t drugs() const { return dose.size(); }
};

/// What a dosing rule may look at when choosing the dose for step `t`:
/// E_0..E_{t-1} and Z_1..Z_{t-1}.
class HistoryView {
 public:
  HistoryView(const Trajectory& traj, std::size_t t) : traj_(&traj), t_(t) {}

  std::size_t t() const { return t_; }
  std::size_t drugs() const { return traj_->drugs(); }

  /// E_s for s in [0, t-1].
  double burden_at(std::size_t s) const { return s == 0 ? traj_->e0 : traj_->burden[s - 1]; }
  /// Z_{drug,s} for s in [0, t-1]; zero at s = 0.
  double dose_at(std::size_t drug, std::size_t s) const {
    return s == 0 ? 0.0 : traj_->dose[drug][s - 1];
  }

 private:
  const Trajectory* traj_;
  std::size_t t_;
};

/// Writes the next dose for every drug into `out`.
using DoseRule = std::function<void(const HistoryView&, Rng&, std::span<double> out)>;

}  // namespace regimen
