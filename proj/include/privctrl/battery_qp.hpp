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

// Battery arbitrage control written as a canonical quadratic program, and the
// cost of a control decision against a (raw) demand series.
//
// Decision layout is [x_in; x_out; x_s] (net form, n = 3H) or
// [x_in; x_out; x_s; t] (epigraph form, n = 4H). x_s(j) is the state of
// charge at the start of interval j.
//
// The canonical objective is  x'Qx + q'x + objective_constant  with Q
// diagonal; the solver works on 1/2 x'(2Q)x.

#ifndef PRIVCTRL_BATTERY_QP_HPP_
#define PRIVCTRL_BATTERY_QP_HPP_

#include <vector>

#include "privctrl/common.hpp"
#include "privctrl/data.hpp"

namespace privctrl {

struct BatterySpec {
  double capacity = 4.0;  // B, kWh
  double alpha = 0.5;     // target fraction of capacity
  double beta1 = 1e-5;
  double beta2 = 1e-5;
  double beta3 = 1e-5;
  double eta_in = 0.95;
  double eta_out = 0.95;
  double c_in = 1.5;    // kW per interval
  double c_out = 1.5;   // kW per interval
  double b_init = 0.04; // kWh

  void validate() const;
  bool operator==(const BatterySpec&) const = default;
};

/// kNet constrains the net grid draw x_in - x_out + d to be nonnegative and
/// can be infeasible; kEpigraph prices the hinge through t and never is.
enum class QpForm { kNet, kEpigraph };

struct CanonicalQP {
  QpForm form = QpForm::kEpigraph;
  Index horizon = 0;
  Matrix Q;  // n x n, diagonal, PSD
  Vector q;
  Matrix A;  // equalities
  Vector b;
  Matrix G;  // inequalities G x <= h
  Vector h;
  /// Inequality rows whose right-hand side is demand_sign * demand(j),
  /// listed in interval order.
  std::vector<Index> demand_rows;
  double demand_sign = 1.0;
  /// Constant dropped from the canonical objective.
  double objective_constant = 0.0;

  Index num_vars() const { return q.size(); }
  Index num_eq() const { return b.size(); }
  Index num_ineq() const { return h.size(); }

  /// x'Qx + q'x (constant excluded).
  double objective(const Vector& x) const;

  /// Rewrites the demand-dependent entries of h.
  void set_demand(const Vector& demand);
};

struct ControlDecision {
  Vector x_in;
  Vector x_out;
  Vector x_s;

  Index horizon() const { return x_in.size(); }
  Vector stacked() const;
  static ControlDecision from_stacked(const Vector& x, Index horizon);
};

/// Box, terminal-energy and net >= 0 rows over [x_in; x_out; x_s].
CanonicalQP build_qp_net_form(const BatterySpec& spec, const PriceSchedule& price,
                                const Vector& demand);

/// Hinge replaced by t >= 0, t >= x_in - x_out + d with cost p't; feasible for
/// every demand vector.
CanonicalQP build_qp_epigraph_form(const BatterySpec& spec, const PriceSchedule& price,
                                   const Vector& demand);

CanonicalQP build_qp(QpForm form, const BatterySpec& spec, const PriceSchedule& price,
                     const Vector& demand);

/// p'(x_in - x_out + d)_+ + b1|x_in|^2 + b2|x_out|^2 + b3|x_s - alpha B|^2
double utility_loss(const ControlDecision& x, const Vector& demand,
                    const PriceSchedule& price, const BatterySpec& spec);

/// Gradient of utility_loss with respect to [x_in; x_out; x_s]. Intervals
/// with a net of exactly zero take the zero subgradient of the hinge.
Vector utility_loss_grad_x(const ControlDecision& x, const Vector& demand,
                           const PriceSchedule& price, const BatterySpec& spec);

/// Maximum violation of box, terminal and dynamics constraints.
double control_violation(const ControlDecision& x, const BatterySpec& spec);

}  // namespace privctrl

#endif  // PRIVCTRL_BATTERY_QP_HPP_
