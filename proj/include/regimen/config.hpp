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

// Run configuration: a plain key = value file, command-line overrides, and
// the mapping onto harness options.
//
// Grammar: one `key = value` per line; `#` starts a comment; blank lines are
// ignored; unknown keys and repeated keys are errors. Lists are
// comma-separated.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "regimen/harness.hpp"

namespace regimen::config {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Config {
  std::vector<std::size_t> setups;  // 1-based simulation numbers
  std::size_t iters = 20;
  std::uint64_t seed_offset = 0;
  std::vector<std::string> methods;  // built-in order when empty
  std::size_t jobs = 1;
  std::filesystem::path out = "results";
  harness::HarnessOptions harness;

  Config();
  /// Every key with its current value, in documented order.
  std::string to_text() const;
  /// FNV-1a of to_text() without the keys that cannot change a cell's
  /// result (jobs, out, setups, iters), as 16 hex digits.
  std::string result_hash() const;
  harness::SweepOptions sweep_options(const harness::MethodRegistry& registry) const;
};

/// The recognized keys, in documented order.
const std::vector<std::string_view>& known_keys();

/// Applies one key. Throws ConfigError on unknown keys or bad values.
void apply(Config& config, std::string_view key, std::string_view value);

/// Parses the file grammar on top of `config`.
void apply_text(Config& config, std::string_view text, std::string_view source = "<config>");
Config load(const std::filesystem::path& path);

/// Setup selection: `all`, numbers, ranges `a-b`, or aspect filters joined
/// with `+` such as `covs:100+policy:informed` (keys covs, T, drop, dose,
/// policy). Items are comma-separated; the result is sorted and unique.
std::vector<std::size_t> parse_setups(std::string_view text);

}  // namespace regimen::config
