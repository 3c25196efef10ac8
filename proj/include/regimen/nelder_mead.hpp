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

namespace regimen::optim {

struct NelderMeadOptions {
  /// Stop when the spread of objective values across the simplex falls
  /// below this.
  double f_tolerance = 1e-8;
  std::size_t max_evaluations = 2000;
  double reflection = 1.0;
  double expansion = 2.0;
  double contraction = 0.5;
  double shrink = 0.5;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  std::size_t evaluations = 0;
  bool converged = false;
};

using Objective = std::function<double(std::span<const double>)>;

/// Downhill simplex minimization from `start`, with the initial simplex
/// offset by `step[i]` along each axis.
NelderMeadResult nelder_mead(const Objective& f, std::vector<double> start,
                             std::span<const double> step, const NelderMeadOptions& options = {});

}  // namespace regimen::optim
