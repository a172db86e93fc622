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

// Implicit differentiation of the optimal primal on a fixed active set.
//
// With the active inequalities appended to the equalities (A_act x = b_act),
// the KKT system  [2Q A_act'; A_act 0] [x; mu] = [-q; b_act]  is linear in
// b_act, so for a cotangent c
//   c' dx = w' d(b_act),   where  [2Q A_act'; A_act 0] [u; w] = [c; 0].
// Only the demand rows of b_act move with the demand.

#include <cmath>
#include <memory>
#include <sstream>

#include "kkt_solver.hpp"
#include "privctrl/qp_engine.hpp"

namespace privctrl {

namespace {

std::string degenerate_message(Index row, double slack, double lambda) {
  std::ostringstream os;
  os << "degenerate active set at inequality row " << row << " (slack " << slack
     << ", multiplier " << lambda << ")";
  return os.str();
}

}  // namespace

DegenerateActiveSet::DegenerateActiveSet(Index row, double slack, double lambda)
    : Error(degenerate_message(row, slack, lambda)), row_(row) {}

namespace {

// Reduced KKT system of the equalities plus a chosen set of active rows.
class ReducedKkt {
 public:
  ReducedKkt(const CanonicalQP& qp, std::vector<Index> active)
      : qp_(qp), active_(std::move(active)) {
    const Index n = qp.num_vars(), p = qp.num_eq();
    const auto k = static_cast<Index>(active_.size());
    Matrix A_act(p + k, n);
    A_act.topRows(p) = qp.A;
    for (Index r = 0; r < k; ++r) A_act.row(p + r) = qp.G.row(active_[static_cast<std::size_t>(r)]);

    // Position of each demand row inside A_act, or -1 when inactive.
    const Index H = static_cast<Index>(qp.demand_rows.size());
    slot_.assign(static_cast<std::size_t>(H), -1);
    for (Index j = 0; j < H; ++j) {
      const Index row = qp.demand_rows[static_cast<std::size_t>(j)];
      for (Index r = 0; r < k; ++r) {
        if (active_[static_cast<std::size_t>(r)] == row) slot_[static_cast<std::size_t>(j)] = p + r;
      }
    }

    // Dependent active rows leave the multipliers undetermined; the demand
    // derivative only exists when no dependency involves a demand row.
    if (A_act.rows() > 0) {
      Eigen::FullPivLU<Matrix> lu(A_act.transpose());
      lu.setThreshold(1e-10);
      if (lu.rank() < A_act.rows()) {
        const Matrix kernel = lu.kernel();
        for (Index j = 0; j < H; ++j) {
          const Index s = slot_[static_cast<std::size_t>(j)];
          if (s >= 0 && kernel.row(s).lpNorm<Eigen::Infinity>() > 1e-8) {
            throw SingularKkt("active demand row " +
                              std::to_string(qp.demand_rows[static_cast<std::size_t>(j)]) +
                              " is linearly dependent on other active constraints");
          }
        }
      }
    }

    const Matrix P = 2.0 * qp.Q;
    kkt_ = std::make_unique<detail::KktSolver>(P.array() != 0.0, A_act.sparseView());
    if (!kkt_->factor(P, 1e-10)) throw SingularKkt("reduced KKT factorization failed");
  }

  /// cotangent' dx*/d(demand).
  Vector vjp(const Vector& cotangent) const {
    const Index n = qp_.num_vars();
    Vector rhs = Vector::Zero(kkt_->n() + kkt_->p());
    rhs.head(n) = cotangent;
    const Vector z = kkt_->solve(rhs, 10);
    const double scale = 1.0 + cotangent.lpNorm<Eigen::Infinity>();
    if (!(kkt_->residual(z, rhs) <= 1e-8 * scale)) {
      throw SingularKkt("reduced KKT system is singular on the cotangent direction");
    }
    Vector out = Vector::Zero(static_cast<Index>(slot_.size()));
    for (std::size_t j = 0; j < slot_.size(); ++j) {
      if (slot_[j] >= 0) out(static_cast<Index>(j)) = qp_.demand_sign * z(n + slot_[j]);
    }
    return out;
  }

 private:
  const CanonicalQP& qp_;
  std::vector<Index> active_;
  std::vector<Index> slot_;
  std::unique_ptr<detail::KktSolver> kkt_;
};

std::vector<Index> active_rows(const std::vector<RowState>& states) {
  std::vector<Index> rows;
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i] == RowState::kActive) rows.push_back(static_cast<Index>(i));
  }
  return rows;
}

}  // namespace

std::vector<RowState> classify_active_set(const CanonicalQP& qp, const QpSolution& sol,
                                          double margin) {
  const Index m = qp.num_ineq();
  const Vector slack = qp.h - qp.G * sol.x;
  std::vector<RowState> states(static_cast<std::size_t>(m), RowState::kInactive);
  std::vector<bool> is_demand(static_cast<std::size_t>(m), false);
  for (Index r : qp.demand_rows) is_demand[static_cast<std::size_t>(r)] = true;
  std::vector<Index> weak;
  for (Index i = 0; i < m; ++i) {
    const bool tight = slack(i) <= margin;
    const bool priced = sol.lambda(i) > margin;
    if (tight && priced) {
      states[static_cast<std::size_t>(i)] = RowState::kActive;
    } else if (!tight && !priced) {
      states[static_cast<std::size_t>(i)] = RowState::kInactive;
    } else if (tight && sol.lambda(i) >= -margin && !is_demand[static_cast<std::size_t>(i)]) {
      weak.push_back(i);  // settled below
    } else {
      throw DegenerateActiveSet(i, slack(i), sol.lambda(i));
    }
  }
  if (weak.empty()) return states;

  // A tight row with a zero multiplier whose right-hand side is fixed can be
  // dropped when the solution map, computed without it, never moves along
  // its normal: the row then stays tight and unpriced on the neighbourhood
  // where the strong active set holds. One adjoint solve per weak row.
  const ReducedKkt strong(qp, active_rows(states));
  for (Index i : weak) {
    const Vector g = qp.G.row(i).transpose();
    const double drift = strong.vjp(g).lpNorm<Eigen::Infinity>();
    if (drift > 1e-9 * (1.0 + g.lpNorm<Eigen::Infinity>())) {
      throw DegenerateActiveSet(i, slack(i), sol.lambda(i));
    }
  }
  return states;
}

Vector vjp_demand(const CanonicalQP& qp, const QpSolution& sol, const Vector& cotangent,
                  const SolverConfig& cfg) {
  if (!sol.optimal()) throw InvalidArgument("vjp_demand needs an optimal solution");
  if (cotangent.size() != qp.num_vars()) throw InvalidArgument("cotangent has wrong length");
  const auto states = classify_active_set(qp, sol, cfg.degenerate_margin);
  return ReducedKkt(qp, active_rows(states)).vjp(cotangent);
}

}  // namespace privctrl
