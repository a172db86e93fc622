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

#include "kkt_solver.hpp"

namespace privctrl::detail {

KktSolver::KktSolver(const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& pattern,
                     const SpMat& A)
    : n_(pattern.rows()), p_(A.rows()), A_(A) {
  const Index dim = n_ + p_;
  std::vector<Eigen::Triplet<double>> trips;
  for (Index j = 0; j < n_; ++j) {
    for (Index i = j; i < n_; ++i) {
      if (i == j || pattern(i, j) || pattern(j, i)) {
        trips.emplace_back(i, j, 0.0);
        h_entries_.emplace_back(i, j);
      }
    }
  }
  for (Index k = 0; k < A_.outerSize(); ++k) {
    for (SpMat::InnerIterator it(A_, k); it; ++it) {
      trips.emplace_back(n_ + it.row(), it.col(), it.value());
    }
  }
  for (Index r = 0; r < p_; ++r) trips.emplace_back(n_ + r, n_ + r, 0.0);

  K_.resize(dim, dim);
  K_.setFromTriplets(trips.begin(), trips.end());
  K_.makeCompressed();

  h_slots_.reserve(h_entries_.size());
  for (const auto& [i, j] : h_entries_) {
    h_slots_.push_back(&K_.coeffRef(i, j));
    if (i == j) diag_slots_.push_back(&K_.coeffRef(i, j));
  }
  for (Index r = 0; r < p_; ++r) reg_slots_.push_back(&K_.coeffRef(n_ + r, n_ + r));
  ldlt_.analyzePattern(K_);
}

bool KktSolver::factor(const Matrix& H, double delta) {
  H_ = H;
  delta_ = delta;
  for (std::size_t k = 0; k < h_entries_.size(); ++k) {
    const auto [i, j] = h_entries_[k];
    *h_slots_[k] = H(i, j);
  }
  for (double* d : diag_slots_) *d += delta;
  for (double* d : reg_slots_) *d = -delta;
  ldlt_.factorize(K_);
  dense_ = ldlt_.info() != Eigen::Success;
  if (!dense_) return true;

  // Pinned rows can push barrier weights far past the curvature of the
  // remaining directions, so a symmetric pivot cancels to exactly zero.
  // Row pivoting on the dense matrix survives that.
  Matrix K = Matrix::Zero(n_ + p_, n_ + p_);
  K.topLeftCorner(n_, n_) = H;
  K.topLeftCorner(n_, n_).diagonal().array() += delta;
  K.bottomLeftCorner(p_, n_) = A_;
  K.topRightCorner(n_, p_) = A_.transpose();
  K.bottomRightCorner(p_, p_).diagonal().setConstant(-delta);
  lu_.compute(K);
  return lu_.matrixLU().diagonal().allFinite() &&
         (lu_.matrixLU().diagonal().array() != 0.0).all();
}

Vector KktSolver::apply(const Vector& z) const {
  Vector out(n_ + p_);
  out.head(n_) = H_ * z.head(n_) + A_.transpose() * z.tail(p_);
  out.tail(p_) = A_ * z.head(n_);
  return out;
}

Vector KktSolver::solve(const Vector& rhs, int refine) const {
  auto base = [&](const Vector& b) -> Vector {
    return dense_ ? Vector(lu_.solve(b)) : Vector(ldlt_.solve(b));
  };
  Vector z = base(rhs);
  for (int k = 0; k < refine; ++k) {
    const Vector r = rhs - apply(z);
    z += base(r);
  }
  return z;
}

double KktSolver::residual(const Vector& z, const Vector& rhs) const {
  return (apply(z) - rhs).lpNorm<Eigen::Infinity>();
}

}  // namespace privctrl::detail
