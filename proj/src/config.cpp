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

#include "regimen/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "regimen/csv.hpp"

namespace regimen::config {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

[[noreturn]] void bad(std::string_view key, std::string_view value, std::string_view why) {
  throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key) + ": " +
                    std::string(why));
}

template <typename T>
T number(std::string_view key, std::string_view value) {
  T v{};
  const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size()) bad(key, value, "not a number");
  return v;
}

std::size_t positive(std::string_view key, std::string_view value) {
  const auto v = number<std::size_t>(key, value);
  if (v == 0) bad(key, value, "must be positive");
  return v;
}

double nonnegative(std::string_view key, std::string_view value) {
  const auto v = number<double>(key, value);
  if (!(v >= 0.0)) bad(key, value, "must be nonnegative");
  return v;
}

std::string list_text(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

bool matches_filter(const cohort::SimSetup& s, std::string_view key, std::string_view value) {
  if (key == "covs") return std::to_string(s.p) == value;
  if (key == "T") return value == (s.horizon == cohort::HorizonMode::two_steps ? "a" : "b");
  if (key == "drop") return value == (s.missing == cohort::MissingMode::none ? "a" : "b");
  if (key == "dose") {
    return value == (s.action == policy::ActionSpace::Kind::binary ? "binary" : "continuous");
  }
  if (key == "policy") {
    return value == (s.policy_mode == cohort::PolicyMode::random ? "random" : "informed");
  }
  throw ConfigError("unknown setup filter key '" + std::string(key) + "'");
}

}  // namespace

Config::Config() {
  for (std::size_t i = 1; i <= 32; ++i) setups.push_back(i);
}

const std::vector<std::string_view>& known_keys() {
  static const std::vector<std::string_view> keys{
      "setups",        "iters",          "seed_offset",   "methods",
      "jobs",          "out",            "n",             "rollouts",
      "mode",          "k",              "caliper",       "context_k",
      "folds",         "fold_average",   "policy_ridge",  "boost_rounds",
      "boost_depth",   "boost_learning_rate", "boost_min_leaf", "simplex_iterations",
      "simplex_step",  "value_ridge",    "dose_grid",     "q_ridge",
      "fqi_iterations", "fqi_discount"};
  return keys;
}

std::vector<std::size_t> parse_setups(std::string_view text) {
  const auto all = cohort::enumerate_setups();
  std::set<std::size_t> out;
  for (auto item : split(text, ',')) {
    if (item.empty()) throw ConfigError("empty item in setup list '" + std::string(text) + "'");
    if (item == "all") {
      for (std::size_t i = 1; i <= all.size(); ++i) out.insert(i);
    } else if (item.find(':') != std::string_view::npos) {
      const auto terms = split(item, '+');
      for (std::size_t i = 0; i < all.size(); ++i) {
        bool ok = true;
        for (auto term : terms) {
          const auto colon = term.find(':');
          if (colon == std::string_view::npos) throw ConfigError("bad setup filter '" + std::string(term) + "'");
          ok = ok && matches_filter(all[i], trim(term.substr(0, colon)), trim(term.substr(colon + 1)));
        }
        if (ok) out.insert(i + 1);
      }
    } else {
      const auto dash = item.find('-');
      const auto lo = number<std::size_t>("setups", item.substr(0, dash));
      const auto hi = dash == std::string_view::npos
                          ? lo
                          : number<std::size_t>("setups", item.substr(dash + 1));
      if (lo < 1 || hi > all.size() || lo > hi) bad("setups", item, "outside 1..32");
      for (std::size_t i = lo; i <= hi; ++i) out.insert(i);
    }
  }
  if (out.empty()) throw ConfigError("setup selection '" + std::string(text) + "' matches nothing");
  return {out.begin(), out.end()};
}

void apply(Config& c, std::string_view key, std::string_view value) {
  value = trim(value);
  auto& h = c.harness;
  auto& p = h.pipeline;
  if (key == "setups") {
    c.setups = parse_setups(value);
  } else if (key == "iters") {
    c.iters = positive(key, value);
  } else if (key == "seed_offset") {
    c.seed_offset = number<std::uint64_t>(key, value);
  } else if (key == "methods") {
    c.methods.clear();
    if (value != "all") {
      const auto registry = harness::MethodRegistry::builtin();
      for (auto m : split(value, ',')) {
        if (!registry.contains(m)) bad(key, m, "unknown method");
        c.methods.emplace_back(m);
      }
    }
  } else if (key == "jobs") {
    c.jobs = positive(key, value);
  } else if (key == "out") {
    if (value.empty()) bad(key, value, "empty path");
    c.out = std::string(value);
  } else if (key == "n") {
    h.n = positive(key, value);
  } else if (key == "rollouts") {
    h.rollouts = positive(key, value);
  } else if (key == "mode") {
    try {
      p.mode = regime::parse_mode(value);
    } catch (const std::invalid_argument&) {
      bad(key, value, "expected uniform or simplex_search");
    }
  } else if (key == "k") {
    p.k = positive(key, value);
  } else if (key == "caliper") {
    if (value == "none") {
      p.caliper.reset();
    } else {
      p.caliper = nonnegative(key, value);
    }
  } else if (key == "context_k") {
    p.context_k = positive(key, value);
  } else if (key == "folds") {
    p.folds = number<std::size_t>(key, value);
    if (p.folds < 2) bad(key, value, "need at least 2 folds");
  } else if (key == "fold_average") {
    if (value == "outcomes") {
      p.average = pipeline::FoldAverage::outcomes;
    } else if (value == "parameters") {
      p.average = pipeline::FoldAverage::parameters;
    } else {
      bad(key, value, "expected outcomes or parameters");
    }
  } else if (key == "policy_ridge") {
    p.policy_ridge = nonnegative(key, value);
  } else if (key == "boost_rounds") {
    p.boosting.rounds = positive(key, value);
  } else if (key == "boost_depth") {
    p.boosting.max_depth = positive(key, value);
  } else if (key == "boost_learning_rate") {
    p.boosting.learning_rate = nonnegative(key, value);
    if (p.boosting.learning_rate == 0.0) bad(key, value, "must be positive");
  } else if (key == "boost_min_leaf") {
    p.boosting.min_samples_leaf = positive(key, value);
  } else if (key == "simplex_iterations") {
    p.simplex.iterations = positive(key, value);
  } else if (key == "simplex_step") {
    p.simplex.step = nonnegative(key, value);
  } else if (key == "value_ridge") {
    p.simplex.ridge = nonnegative(key, value);
  } else if (key == "dose_grid") {
    try {
      h.q.grid = h.fqi.grid = baselines::parse_grid(value);
    } catch (const std::invalid_argument&) {
      bad(key, value, "expected binary or five_level");
    }
  } else if (key == "q_ridge") {
    h.q.ridge = h.fqi.ridge = nonnegative(key, value);
  } else if (key == "fqi_iterations") {
    h.fqi.iterations = positive(key, value);
  } else if (key == "fqi_discount") {
    h.fqi.discount = nonnegative(key, value);
    if (h.fqi.discount >= 1.0) bad(key, value, "must be below 1");
  } else {
    throw ConfigError("unknown configuration key '" + std::string(key) + "'");
  }
}

void apply_text(Config& config, std::string_view text, std::string_view source) {
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string_view::npos) line = trim(line.substr(0, hash));
    if (line.empty()) continue;
    const auto where = std::string(source) + ":" + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
    const auto key = trim(line.substr(0, eq));
    if (!seen.insert(std::string(key)).second) {
      throw ConfigError(where + "repeated key '" + std::string(key) + "'");
    }
    try {
      apply(config, key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
}

Config load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  Config c;
  apply_text(c, ss.str(), path.string());
  return c;
}

std::string Config::to_text() const {
  const auto& h = harness;
  const auto& p = h.pipeline;
  const auto f = [](double v) { return csv::format_double(v); };
  std::string m;
  for (std::size_t i = 0; i < methods.size(); ++i) m += (i ? "," : "") + methods[i];
  std::ostringstream os;
  os << "setups = " << list_text(setups) << "\n"
     << "iters = " << iters << "\n"
     << "seed_offset = " << seed_offset << "\n"
     << "methods = " << (methods.empty() ? "all" : m) << "\n"
     << "jobs = " << jobs << "\n"
     << "out = " << out.string() << "\n"
     << "n = " << h.n << "\n"
     << "rollouts = " << h.rollouts << "\n"
     << "mode = " << regime::mode_name(p.mode) << "\n"
     << "k = " << p.k << "\n"
     << "caliper = " << (p.caliper ? f(*p.caliper) : "none") << "\n"
     << "context_k = " << p.context_k << "\n"
     << "folds = " << p.folds << "\n"
     << "fold_average = "
     << (p.average == pipeline::FoldAverage::outcomes ? "outcomes" : "parameters") << "\n"
     << "policy_ridge = " << f(p.policy_ridge) << "\n"
     << "boost_rounds = " << p.boosting.rounds << "\n"
     << "boost_depth = " << p.boosting.max_depth << "\n"
     << "boost_learning_rate = " << f(p.boosting.learning_rate) << "\n"
     << "boost_min_leaf = " << p.boosting.min_samples_leaf << "\n"
     << "simplex_iterations = " << p.simplex.iterations << "\n"
     << "simplex_step = " << f(p.simplex.step) << "\n"
     << "value_ridge = " << f(p.simplex.ridge) << "\n"
     << "dose_grid = " << baselines::grid_name(h.q.grid) << "\n"
     << "q_ridge = " << f(h.q.ridge) << "\n"
     << "fqi_iterations = " << h.fqi.iterations << "\n"
     << "fqi_discount = " << f(h.fqi.discount) << "\n";
  return os.str();
}

std::string Config::result_hash() const {
  // Setups and iters only decide which cells exist, so a sweep can be
  // extended in the same directory.
  std::uint64_t h = 14695981039346656037ull;
  std::istringstream in(to_text());
  std::string line;
  while (std::getline(in, line)) {
    for (const char* skip : {"jobs ", "out ", "setups ", "iters "}) {
      if (line.rfind(skip, 0) == 0) line.clear();
    }
    for (unsigned char ch : line) {
      h ^= ch;
      h *= 1099511628211ull;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

harness::SweepOptions Config::sweep_options(const harness::MethodRegistry& registry) const {
  harness::SweepOptions s;
  s.sims = setups;
  s.iters = iters;
  s.seed_offset = seed_offset;
  s.methods = methods.empty() ? registry.names() : methods;
  s.jobs = jobs;
  s.out = out;
  s.harness = harness;
  s.config_hash = result_hash();
  return s;
}

}  // namespace regimen::config
