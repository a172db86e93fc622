// Copyright 2026 The privctrl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Internal: sparse LDL' of the regularized quasi-definite system
//   [ H + delta I   A'       ]
//   [ A            -delta I  ]
// with iterative refinement against the unregularized matrix. Falls back
// to a dense pivoted LU when a symmetric pivot vanishes.

#ifndef PRIVCTRL_SRC_KKT_SOLVER_HPP_
#define PRIVCTRL_SRC_KKT_SOLVER_HPP_

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <vector>

#include "privctrl/common.hpp"

namespace privctrl::detail {

using SpMat = Eigen::SparseMatrix<double>;

class KktSolver {
 public:
  /// `pattern` marks the structurally nonzero entries of H (any symmetric
  /// superset is fine); A is p x n.
  KktSolver(const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& pattern,
            const SpMat& A);

  /// Returns false when the LDL' factorization breaks down.
  bool factor(const Matrix& H, double delta);

  /// Solves the unregularized system; `refine` refinement sweeps.
  Vector solve(const Vector& rhs, int refine = 3) const;

  /// Residual norm |K z - rhs|_inf of the unregularized system.
  double residual(const Vector& z, const Vector& rhs) const;

  Index n() const { return n_; }
  Index p() const { return p_; }

 private:
  Vector apply(const Vector& z) const;

  Index n_;
  Index p_;
  SpMat A_;
  SpMat K_;  // lower triangle
  std::vector<std::pair<Index, Index>> h_entries_;  // (row, col) per H slot
  std::vector<double*> h_slots_;
  std::vector<double*> reg_slots_;   // constraint-block diagonal
  std::vector<double*> diag_slots_;  // H diagonal (for delta)
  Matrix H_;
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
  Eigen::PartialPivLU<Matrix> lu_;  // fallback when the LDL' breaks down
  bool dense_ = false;
  double delta_ = 0.0;
};

}  // namespace privctrl::detail

#endif  // PRIVCTRL_SRC_KKT_SOLVER_HPP_
