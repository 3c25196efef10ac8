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

#include <array>
#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace regimen {

/// Name recorded in run manifests. Changing the generator or the stream
/// derivation scheme invalidates every frozen fixture.
inline constexpr std::string_view kRngAlgorithm =
    "xoshiro256** with splitmix64-keyed substreams (v1)";

/// Stream tags used when deriving substreams. The numeric values are part of
/// the reproducibility contract.
enum class Stream : std::uint64_t {
  patient = 1,
  trajectory = 2,
  folds = 3,
  evaluation = 4,
  method = 5,
  expert_type = 6,
  fit_restart = 7,
  panel = 8,
};

std::uint64_t splitmix64_next(std::uint64_t& state);

/// Finalizer from splitmix64; a bijective 64-bit mixer.
std::uint64_t mix64(std::uint64_t x);

/// xoshiro256** generator with explicit, portable sampling routines. Standard
/// library distributions are avoided because their algorithms differ across
/// implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Independent generator keyed by a seed and a path of stream identifiers.
  /// The result depends only on (seed, path), never on call order.
  static Rng substream(std::uint64_t seed, std::initializer_list<std::uint64_t> path);
  static Rng substream(std::uint64_t seed, Stream tag, std::uint64_t index) {
    return substream(seed, {static_cast<std::uint64_t>(tag), index});
  }

  std::uint64_t next_u64();

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in the closed range [lo, hi].
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi);

  /// Box-Muller normal; one draw consumes two uniforms.
  double normal(double mean, double sd);

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::array<std::uint64_t, 4> state_{};
};

}  // namespace regimen
