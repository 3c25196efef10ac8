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

#include "regimen/linear_model.hpp"

#include <algorithm>
#include <stdexcept>

namespace regimen::linalg {

RidgeSolver::RidgeSolver(const Eigen::MatrixXd& design, double lambda)
    : design_(&design), lambda_(lambda) {
  if (lambda < 0.0) throw std::invalid_argument("ridge penalty must be nonnegative");
  const Eigen::Index cols = design.cols();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(cols, cols);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(design.transpose());
  gram = gram.selfadjointView<Eigen::Lower>();
  const double scale = std::max(1.0, gram.diagonal().maxCoeff());

  auto factor = [&](double penalty) {
    Eigen::MatrixXd g = gram;
    g.diagonal().array() += penalty;
    llt_.compute(g);
    if (llt_.info() != Eigen::Success) return false;
    // LLT succeeds on nearly singular matrices; reject tiny pivots.
    const auto& l = llt_.matrixLLT();
    const double min_pivot = l.diagonal().minCoeff();
    return min_pivot * min_pivot > 1e-13 * scale;
  };

  if (!factor(lambda)) {
    used_fallback_ = true;
    lambda_ = std::max(lambda, 1e-8 * scale);
    if (!factor(lambda_)) throw std::runtime_error("ridge: factorization failed after fallback");
  }
}

Eigen::VectorXd RidgeSolver::solve(const Eigen::VectorXd& target) const {
  if (target.size() != design_->rows()) throw std::invalid_argument("ridge: target length mismatch");
  return llt_.solve(design_->transpose() * target);
}

double r_squared(const Eigen::VectorXd& target, const Eigen::VectorXd& fitted, bool* degenerate) {
  const double mean = target.mean();
  const double ss_tot = (target.array() - mean).square().sum();
  const double ss_res = (target - fitted).squaredNorm();
  const bool flat = ss_tot <= 1e-12 * std::max(1.0, target.squaredNorm());
  if (degenerate) *degenerate = flat;
  if (flat) return 0.0;
  return 1.0 - ss_res / ss_tot;
}

}  // namespace regimen::linalg
