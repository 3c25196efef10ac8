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

// Honest distance-metric learning from boosted shallow regression trees and
// nearest-neighbour / caliper matched-group construction.

#include <cstddef>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "regimen/rng.hpp"

namespace regimen::matching {

/// Row-major matrix of matching features V.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;
  std::vector<std::string> names;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
};

/// Column z-scoring with statistics from a subset of rows.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const FeatureMatrix& v, std::span<const std::size_t> rows);
  void apply(FeatureMatrix& v) const;
  void apply(std::span<double> row) const;
};

struct BoostingConfig {
  std::size_t rounds = 100;
  std::size_t max_depth = 2;
  double learning_rate = 0.1;
  std::size_t min_samples_leaf = 1;
};

/// Squared-error gradient boosting with exact greedy splits.
class BoostedTrees {
 public:
  static BoostedTrees fit(const FeatureMatrix& v, std::span<const std::size_t> rows,
                          std::span<const double> target, const BoostingConfig& config);

  double predict(std::span<const double> row) const;
  /// Total squared-error reduction attributed to each feature.
  const std::vector<double>& importances() const { return importance_; }
  /// Training MSE before the first round and after each round.
  const std::vector<double>& training_mse() const { return mse_; }
  std::size_t split_count() const;

 private:
  struct Node {
    int feature = -1;  // -1 for leaves
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };
  using Tree = std::vector<Node>;

  double base_ = 0.0;
  double learning_rate_ = 0.1;
  std::vector<Tree> trees_;
  std::vector<double> importance_;
  std::vector<double> mse_;
};

/// Diagonal metric d(a, b) = sum_j w_j (a_j - b_j)^2.
struct DistanceMetric {
  std::vector<double> weights;
  /// The training target was constant; weights are uniform.
  bool degenerate = false;

  /// Throws std::invalid_argument on negative weights or all-zero weights.
  void validate() const;
};

/// Fits the boosted ensemble predicting y from V on `rows` and normalizes the
/// per-feature impurity reductions to sum to 1. Requires at least 20 rows.
DistanceMetric learn_metric(const FeatureMatrix& v, std::span<const std::size_t> rows,
                            std::span<const double> y, const BoostingConfig& config = {});

double distance(const DistanceMetric& metric, std::span<const double> a, std::span<const double> b);

/// Balanced random partition of [0, n) into `folds` groups; entry i is the
/// fold of item i.
std::vector<std::size_t> honest_folds(std::size_t n, std::size_t folds, Rng& rng);

/// Items of one fold and of all the others.
struct FoldSplit {
  std::vector<std::size_t> metric_rows;
  std::vector<std::size_t> estimation_rows;
};
FoldSplit split_fold(std::span<const std::size_t> assignment, std::size_t metric_fold);

/// Contiguous block of candidate feature rows for one matching pass.
struct Candidates {
  std::vector<std::size_t> ids;
  std::vector<int> y;
  std::vector<double> features;  // ids.size() x dim, row-major
  std::size_t dim = 0;

  static Candidates gather(const FeatureMatrix& v, std::span<const std::size_t> rows,
                           std::span<const int> y_by_row);
  std::size_t size() const { return ids.size(); }
};

struct MatchMode {
  enum class Kind { knn, caliper };
  Kind kind = Kind::knn;
  std::size_t k = 5;
  double radius = 0.0;

  static MatchMode knn(std::size_t k) { return {Kind::knn, k, 0.0}; }
  static MatchMode caliper(double r) { return {Kind::caliper, 0, r}; }
};

struct Neighbor {
  std::size_t id;
  double distance;
};

struct MatchedGroup {
  std::size_t center = 0;
  std::vector<Neighbor> neighbors;  // ascending distance, ties by id
  MatchMode mode;
  bool filtered_good = false;

  std::vector<std::size_t> ids() const;
};

/// Not enough qualifying candidates for a k-NN group.
class InsufficientNeighbors : public std::runtime_error {
 public:
  InsufficientNeighbors(std::size_t requested, std::size_t available);
  std::size_t shortfall() const { return shortfall_; }

 private:
  std::size_t shortfall_;
};

/// Matched group around `center_v`. Candidates whose id equals `center_id`
/// are skipped. With `filter_good` only candidates with y == 0 qualify.
MatchedGroup match(std::size_t center_id, std::span<const double> center_v,
                   const Candidates& candidates, const DistanceMetric& metric, MatchMode mode,
                   bool filter_good);

void write_metric_csv(const std::filesystem::path& path, const DistanceMetric& metric,
                      std::span<const std::string> names);
void write_groups_csv(const std::filesystem::path& path, std::span<const MatchedGroup> groups);

}  // namespace regimen::matching
