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

#include "regimen/matching.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "regimen/csv.hpp"
#include "regimen/simd/kernels.hpp"

namespace regimen::matching {

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

// Best exact split of `samples` on the residuals.
Split best_split(const FeatureMatrix& v, std::span<const std::size_t> rows,
                 const std::vector<std::size_t>& samples, const std::vector<double>& residual,
                 std::size_t min_leaf) {
  Split best;
  const std::size_t n = samples.size();
  if (n < 2 * min_leaf) return best;
  double total = 0.0;
  for (std::size_t s : samples) total += residual[s];
  const double parent = total * total / static_cast<double>(n);

  std::vector<std::pair<double, double>> col(n);
  for (std::size_t j = 0; j < v.cols; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      col[i] = {v.at(rows[samples[i]], j), residual[samples[i]]};
    }
    std::sort(col.begin(), col.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    double left = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      left += col[i].second;
      if (col[i].first == col[i + 1].first) continue;
      const std::size_t nl = i + 1;
      const std::size_t nr = n - nl;
      if (nl < min_leaf || nr < min_leaf) continue;
      const double right = total - left;
      const double gain = left * left / static_cast<double>(nl) +
                          right * right / static_cast<double>(nr) - parent;
      if (gain > best.gain) {
        best.gain = gain;
        best.feature = static_cast<int>(j);
        best.threshold = 0.5 * (col[i].first + col[i + 1].first);
      }
    }
  }
  // Gains at rounding level are not real splits.
  if (best.gain <= 1e-12 * std::max(1.0, parent)) best.feature = -1;
  return best;
}

}  // namespace

Standardizer Standardizer::fit(const FeatureMatrix& v, std::span<const std::size_t> rows) {
  Standardizer s;
  s.mean.assign(v.cols, 0.0);
  s.scale.assign(v.cols, 1.0);
  if (rows.empty()) return s;
  const double n = static_cast<double>(rows.size());
  for (std::size_t j = 0; j < v.cols; ++j) {
    double sum = 0.0;
    for (std::size_t r : rows) sum += v.at(r, j);
    const double mean = sum / n;
    double ss = 0.0;
    for (std::size_t r : rows) ss += (v.at(r, j) - mean) * (v.at(r, j) - mean);
    const double sd = std::sqrt(ss / n);
    s.mean[j] = mean;
    s.scale[j] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

void Standardizer::apply(std::span<double> row) const {
  for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - mean[j]) / scale[j];
}

void Standardizer::apply(FeatureMatrix& v) const {
  for (std::size_t i = 0; i < v.rows; ++i) apply(v.row(i));
}

BoostedTrees BoostedTrees::fit(const FeatureMatrix& v, std::span<const std::size_t> rows,
                               std::span<const double> target, const BoostingConfig& config) {
  if (rows.size() != target.size()) throw std::invalid_argument("boosting: target length");
  if (rows.empty()) throw std::invalid_argument("boosting: no rows");
  if (config.max_depth < 1 || config.learning_rate <= 0.0) {
    throw std::invalid_argument("boosting: bad configuration");
  }
  BoostedTrees model;
  model.learning_rate_ = config.learning_rate;
  model.importance_.assign(v.cols, 0.0);
  const std::size_t n = rows.size();
  model.base_ = std::accumulate(target.begin(), target.end(), 0.0) / static_cast<double>(n);

  std::vector<double> pred(n, model.base_);
  std::vector<double> residual(n);
  auto mse = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += (target[i] - pred[i]) * (target[i] - pred[i]);
    return s / static_cast<double>(n);
  };
  model.mse_.push_back(mse());

  for (std::size_t round = 0; round < config.rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) residual[i] = target[i] - pred[i];

    Tree tree;
    // Each frontier entry: node index, its samples, its depth.
    struct Pending {
      int node;
      std::vector<std::size_t> samples;
      std::size_t depth;
    };
    std::vector<Pending> frontier;
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    tree.push_back({});
    frontier.push_back({0, std::move(all), 0});
    std::vector<std::pair<int, std::vector<std::size_t>>> leaves;

    while (!frontier.empty()) {
      Pending cur = std::move(frontier.back());
      frontier.pop_back();
      Split split;
      if (cur.depth < config.max_depth) {
        split = best_split(v, rows, cur.samples, residual, config.min_samples_leaf);
      }
      if (split.feature < 0) {
        double sum = 0.0;
        for (std::size_t s : cur.samples) sum += residual[s];
        tree[cur.node].value = sum / static_cast<double>(cur.samples.size());
        leaves.emplace_back(cur.node, std::move(cur.samples));
        continue;
      }
      model.importance_[static_cast<std::size_t>(split.feature)] += split.gain;
      std::vector<std::size_t> left, right;
      for (std::size_t s : cur.samples) {
        (v.at(rows[s], static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right)
            .push_back(s);
      }
      const int l = static_cast<int>(tree.size());
      tree.push_back({});
      tree.push_back({});
      tree[cur.node].feature = split.feature;
      tree[cur.node].threshold = split.threshold;
      tree[cur.node].left = l;
      tree[cur.node].right = l + 1;
      // Right first so the left child is expanded first.
      frontier.push_back({l + 1, std::move(right), cur.depth + 1});
      frontier.push_back({l, std::move(left), cur.depth + 1});
    }

    for (const auto& [node, samples] : leaves) {
      const double step = model.learning_rate_ * tree[node].value;
      for (std::size_t s : samples) pred[s] += step;
    }
    model.trees_.push_back(std::move(tree));
    model.mse_.push_back(mse());
  }
  return model;
}

double BoostedTrees::predict(std::span<const double> row) const {
  double out = base_;
  for (const Tree& tree : trees_) {
    int node = 0;
    while (tree[node].feature >= 0) {
      node = row[static_cast<std::size_t>(tree[node].feature)] <= tree[node].threshold
                 ? tree[node].left
                 : tree[node].right;
    }
    out += learning_rate_ * tree[node].value;
  }
  return out;
}

std::size_t BoostedTrees::split_count() const {
  std::size_t count = 0;
  for (const Tree& t : trees_) {
    for (const Node& n : t) count += n.feature >= 0 ? 1 : 0;
  }
  return count;
}

void DistanceMetric::validate() const {
  bool positive = false;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("metric: negative weight");
    positive = positive || w > 0.0;
  }
  if (!positive) throw std::invalid_argument("metric: all weights are zero");
}

DistanceMetric learn_metric(const FeatureMatrix& v, std::span<const std::size_t> rows,
                            std::span<const double> y, const BoostingConfig& config) {
  if (rows.size() < 20) throw std::invalid_argument("learn_metric: need at least 20 rows");
  if (v.cols == 0) throw std::invalid_argument("learn_metric: no features");
  const BoostedTrees model = BoostedTrees::fit(v, rows, y, config);
  DistanceMetric metric;
  const auto& imp = model.importances();
  const double total = std::accumulate(imp.begin(), imp.end(), 0.0);
  if (!(total > 0.0)) {
    metric.weights.assign(v.cols, 1.0 / static_cast<double>(v.cols));
    metric.degenerate = true;
    return metric;
  }
  metric.weights.resize(v.cols);
  for (std::size_t j = 0; j < v.cols; ++j) metric.weights[j] = imp[j] / total;
  return metric;
}

double distance(const DistanceMetric& metric, std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() != metric.weights.size()) {
    throw std::invalid_argument("distance: dimension mismatch");
  }
  double out = 0.0;
  simd::weighted_sq_distances(a, b, metric.weights, std::span<double>(&out, 1));
  return out;
}

std::vector<std::size_t> honest_folds(std::size_t n, std::size_t folds, Rng& rng) {
  if (folds == 0 || n < folds) throw std::invalid_argument("honest_folds: need n >= folds >= 1");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(perm[i - 1], perm[rng.uniform_int(0, i - 1)]);
  }
  std::vector<std::size_t> fold(n);
  for (std::size_t i = 0; i < n; ++i) fold[perm[i]] = i % folds;
  return fold;
}

FoldSplit split_fold(std::span<const std::size_t> assignment, std::size_t metric_fold) {
  FoldSplit s;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    (assignment[i] == metric_fold ? s.metric_rows : s.estimation_rows).push_back(i);
  }
  return s;
}

Candidates Candidates::gather(const FeatureMatrix& v, std::span<const std::size_t> rows,
                              std::span<const int> y_by_row) {
  Candidates c;
  c.dim = v.cols;
  c.ids.assign(rows.begin(), rows.end());
  c.y.reserve(rows.size());
  c.features.reserve(rows.size() * v.cols);
  for (std::size_t r : rows) {
    c.y.push_back(y_by_row[r]);
    const auto row = v.row(r);
    c.features.insert(c.features.end(), row.begin(), row.end());
  }
  return c;
}

std::vector<std::size_t> MatchedGroup::ids() const {
  std::vector<std::size_t> out;
  out.reserve(neighbors.size());
  for (const auto& n : neighbors) out.push_back(n.id);
  return out;
}

InsufficientNeighbors::InsufficientNeighbors(std::size_t requested, std::size_t available)
    : std::runtime_error("match: requested " + std::to_string(requested) +
                         " neighbours but only " + std::to_string(available) + " qualify"),
      shortfall_(requested - available) {}

MatchedGroup match(std::size_t center_id, std::span<const double> center_v,
                   const Candidates& candidates, const DistanceMetric& metric, MatchMode mode,
                   bool filter_good) {
  if (center_v.size() != candidates.dim || metric.weights.size() != candidates.dim) {
    throw std::invalid_argument("match: dimension mismatch");
  }
  std::vector<double> dist(candidates.size());
  simd::weighted_sq_distances(center_v, candidates.features, metric.weights, dist);

  std::vector<std::size_t> pool;
  pool.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates.ids[i] == center_id) continue;
    if (filter_good && candidates.y[i] != 0) continue;
    if (mode.kind == MatchMode::Kind::caliper && !(dist[i] <= mode.radius)) continue;
    pool.push_back(i);
  }
  auto closer = [&](std::size_t a, std::size_t b) {
    if (dist[a] != dist[b]) return dist[a] < dist[b];
    return candidates.ids[a] < candidates.ids[b];
  };

  if (mode.kind == MatchMode::Kind::knn) {
    if (pool.size() < mode.k) throw InsufficientNeighbors(mode.k, pool.size());
    const auto kth = pool.begin() + static_cast<std::ptrdiff_t>(mode.k);
    std::partial_sort(pool.begin(), kth, pool.end(), closer);
    pool.erase(kth, pool.end());
  } else {
    std::sort(pool.begin(), pool.end(), closer);
  }

  MatchedGroup g;
  g.center = center_id;
  g.mode = mode;
  g.filtered_good = filter_good;
  g.neighbors.reserve(pool.size());
  for (std::size_t i : pool) g.neighbors.push_back({candidates.ids[i], dist[i]});
  return g;
}

void write_metric_csv(const std::filesystem::path& path, const DistanceMetric& metric,
                      std::span<const std::string> names) {
  csv::Table t;
  t.header = {"feature", "weight"};
  for (std::size_t j = 0; j < metric.weights.size(); ++j) {
    t.rows.push_back({j < names.size() ? names[j] : "V" + std::to_string(j + 1),
                      csv::format_double(metric.weights[j])});
  }
  csv::write_atomic(path, t);
}

void write_groups_csv(const std::filesystem::path& path, std::span<const MatchedGroup> groups) {
  csv::Table t;
  t.header = {"center", "neighbor", "distance"};
  for (const auto& g : groups) {
    for (const auto& n : g.neighbors) {
      t.rows.push_back({std::to_string(g.center), std::to_string(n.id),
                        csv::format_double(n.distance)});
    }
  }
  csv::write_atomic(path, t);
}

}  // namespace regimen::matching
