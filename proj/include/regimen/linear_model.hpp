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

#include <Eigen/Dense>

namespace regimen::linalg {

/// Factored ridge system (X^T X + lambda I) b = X^T y. The factorization is
/// reused across right-hand sides, which fitted Q-iteration relies on.
///
/// When the penalized Gram matrix is not positive definite (lambda = 0 on a
/// rank-deficient design) a small fallback penalty is applied and
/// `used_fallback()` reports it.
class RidgeSolver {
 public:
  /// `design` must outlive the solver.
  RidgeSolver(const Eigen::MatrixXd& design, double lambda);
  RidgeSolver(Eigen::MatrixXd&&, double) = delete;

  Eigen::VectorXd solve(const Eigen::VectorXd& target) const;
  bool used_fallback() const { return used_fallback_; }
  double lambda() const { return lambda_; }

 private:
  const Eigen::MatrixXd* design_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double lambda_;
  bool used_fallback_ = false;
};

/// In-sample coefficient of determination; returns 0 and sets `degenerate`
/// when the target has no variance.
double r_squared(const Eigen::VectorXd& target, const Eigen::VectorXd& fitted, bool* degenerate);

}  // namespace regimen::linalg
