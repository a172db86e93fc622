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

#include "privctrl/battery_qp.hpp"

#include <algorithm>
#include <cmath>

namespace privctrl {

void BatterySpec::validate() const {
  if (!(capacity >= 0.0)) throw InvalidArgument("battery capacity must be nonnegative");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  if (beta1 < 0.0 || beta2 < 0.0 || beta3 < 0.0) {
    throw InvalidArgument("battery penalty weights must be nonnegative");
  }
  if (!(eta_in > 0.0 && eta_in <= 1.0) || !(eta_out > 0.0 && eta_out <= 1.0)) {
    throw InvalidArgument("efficiencies must lie in (0, 1]");
  }
  if (!(c_in > 0.0) || !(c_out > 0.0)) throw InvalidArgument("power capacities must be positive");
  if (b_init < 0.0 || b_init > capacity) throw InvalidArgument("b_init must lie in [0, capacity]");
}

double CanonicalQP::objective(const Vector& x) const {
  return x.dot(Q * x) + q.dot(x);
}

void CanonicalQP::set_demand(const Vector& demand) {
  if (demand.size() != static_cast<Index>(demand_rows.size())) {
    throw InvalidArgument("demand length does not match the QP horizon");
  }
  for (std::size_t j = 0; j < demand_rows.size(); ++j) {
    const auto row = demand_rows[j];
    const double d = demand(static_cast<Index>(j));
    // The net form carries p'd in its constant; q's first block is p.
    if (form == QpForm::kNet) {
      objective_constant += q(static_cast<Index>(j)) * (d - demand_sign * h(row));
    }
    h(row) = demand_sign * d;
  }
}

Vector ControlDecision::stacked() const {
  const Index H = horizon();
  Vector x(3 * H);
  x << x_in, x_out, x_s;
  return x;
}

ControlDecision ControlDecision::from_stacked(const Vector& x, Index horizon) {
  if (x.size() < 3 * horizon) throw InvalidArgument("decision vector too short");
  return {x.segment(0, horizon), x.segment(horizon, horizon),
          x.segment(2 * horizon, horizon)};
}

namespace {

void check_inputs(const BatterySpec& spec, const PriceSchedule& price,
                  const Vector& demand) {
  spec.validate();
  if (demand.size() == 0) throw InvalidArgument("empty demand vector");
  if (price.horizon() != demand.size()) {
    throw InvalidArgument("price and demand lengths differ");
  }
}

// Shared rows over the battery block [x_in; x_out; x_s] of an n-column
// problem: 6H box rows followed by the two terminal-energy rows.
void fill_battery_rows(const BatterySpec& spec, Index H, Matrix& G, Vector& h) {
  const Index in = 0, out = H, s = 2 * H;
  for (Index j = 0; j < H; ++j) {
    G(j, in + j) = 1.0;           h(j) = spec.c_in;
    G(H + j, in + j) = -1.0;      h(H + j) = 0.0;
    G(2 * H + j, out + j) = 1.0;  h(2 * H + j) = spec.c_out;
    G(3 * H + j, out + j) = -1.0; h(3 * H + j) = 0.0;
    G(4 * H + j, s + j) = 1.0;    h(4 * H + j) = spec.capacity;
    G(5 * H + j, s + j) = -1.0;   h(5 * H + j) = 0.0;
  }
  // State after the last interval must stay within [0, B].
  const Index r = 6 * H;
  G(r, s + H - 1) = 1.0;
  G(r, in + H - 1) = spec.eta_in;
  G(r, out + H - 1) = -1.0 / spec.eta_out;
  h(r) = spec.capacity;
  G.row(r + 1) = -G.row(r);
  h(r + 1) = 0.0;
}

// x_s(1) = B_init, then x_s(j+1) - x_s(j) - eta_in x_in(j) + x_out(j)/eta_out = 0.
void fill_equalities(const BatterySpec& spec, Index H, Matrix& A, Vector& b) {
  const Index in = 0, out = H, s = 2 * H;
  A(0, s) = 1.0;
  b(0) = spec.b_init;
  for (Index j = 0; j + 1 < H; ++j) {
    A(j + 1, s + j + 1) = 1.0;
    A(j + 1, s + j) = -1.0;
    A(j + 1, in + j) = -spec.eta_in;
    A(j + 1, out + j) = 1.0 / spec.eta_out;
    b(j + 1) = 0.0;
  }
}

}  // namespace

CanonicalQP build_qp_net_form(const BatterySpec& spec, const PriceSchedule& price,
                                const Vector& demand) {
  check_inputs(spec, price, demand);
  const Index H = demand.size();
  const Index n = 3 * H;
  CanonicalQP qp;
  qp.form = QpForm::kNet;
  qp.horizon = H;

  qp.Q = Matrix::Zero(n, n);
  qp.Q.diagonal() << Vector::Constant(H, spec.beta1), Vector::Constant(H, spec.beta2),
      Vector::Constant(H, spec.beta3);
  qp.q.resize(n);
  qp.q << price.prices, -price.prices,
      Vector::Constant(H, -2.0 * spec.beta3 * spec.alpha * spec.capacity);

  qp.A = Matrix::Zero(H, n);
  qp.b = Vector::Zero(H);
  fill_equalities(spec, H, qp.A, qp.b);

  const Index m = 7 * H + 2;
  qp.G = Matrix::Zero(m, n);
  qp.h = Vector::Zero(m);
  fill_battery_rows(spec, H, qp.G, qp.h);
  const Index first = 6 * H + 2;
  for (Index j = 0; j < H; ++j) {
    qp.G(first + j, j) = -1.0;
    qp.G(first + j, H + j) = 1.0;
    qp.h(first + j) = demand(j);
    qp.demand_rows.push_back(first + j);
  }
  qp.demand_sign = 1.0;
  const double ab = spec.alpha * spec.capacity;
  qp.objective_constant = price.prices.dot(demand) +
                          spec.beta3 * ab * ab * static_cast<double>(H);
  return qp;
}

CanonicalQP build_qp_epigraph_form(const BatterySpec& spec, const PriceSchedule& price,
                                   const Vector& demand) {
  check_inputs(spec, price, demand);
  const Index H = demand.size();
  const Index n = 4 * H;
  CanonicalQP qp;
  qp.form = QpForm::kEpigraph;
  qp.horizon = H;

  qp.Q = Matrix::Zero(n, n);
  qp.Q.diagonal() << Vector::Constant(H, spec.beta1), Vector::Constant(H, spec.beta2),
      Vector::Constant(H, spec.beta3), Vector::Zero(H);
  qp.q.resize(n);
  qp.q << Vector::Zero(2 * H),
      Vector::Constant(H, -2.0 * spec.beta3 * spec.alpha * spec.capacity), price.prices;

  qp.A = Matrix::Zero(H, n);
  qp.b = Vector::Zero(H);
  fill_equalities(spec, H, qp.A, qp.b);

  const Index m = 8 * H + 2;
  qp.G = Matrix::Zero(m, n);
  qp.h = Vector::Zero(m);
  fill_battery_rows(spec, H, qp.G, qp.h);
  const Index t = 3 * H;
  const Index nonneg = 6 * H + 2;
  const Index first = 7 * H + 2;
  for (Index j = 0; j < H; ++j) {
    qp.G(nonneg + j, t + j) = -1.0;
    qp.G(first + j, j) = 1.0;
    qp.G(first + j, H + j) = -1.0;
    qp.G(first + j, t + j) = -1.0;
    qp.h(first + j) = -demand(j);
    qp.demand_rows.push_back(first + j);
  }
  qp.demand_sign = -1.0;
  const double ab = spec.alpha * spec.capacity;
  qp.objective_constant = spec.beta3 * ab * ab * static_cast<double>(H);
  return qp;
}

CanonicalQP build_qp(QpForm form, const BatterySpec& spec, const PriceSchedule& price,
                     const Vector& demand) {
  return form == QpForm::kNet ? build_qp_net_form(spec, price, demand)
                                : build_qp_epigraph_form(spec, price, demand);
}

double utility_loss(const ControlDecision& x, const Vector& demand,
                    const PriceSchedule& price, const BatterySpec& spec) {
  const Vector net = x.x_in - x.x_out + demand;
  const double energy = price.prices.dot(net.cwiseMax(0.0));
  const double target = spec.alpha * spec.capacity;
  return energy + spec.beta1 * x.x_in.squaredNorm() + spec.beta2 * x.x_out.squaredNorm() +
         spec.beta3 * (x.x_s.array() - target).matrix().squaredNorm();
}

Vector utility_loss_grad_x(const ControlDecision& x, const Vector& demand,
                           const PriceSchedule& price, const BatterySpec& spec) {
  const Index H = x.horizon();
  const Vector net = x.x_in - x.x_out + demand;
  const Vector priced =
      (net.array() > 0.0).select(price.prices.array(), 0.0).matrix();
  Vector g(3 * H);
  g.segment(0, H) = 2.0 * spec.beta1 * x.x_in + priced;
  g.segment(H, H) = 2.0 * spec.beta2 * x.x_out - priced;
  g.segment(2 * H, H) =
      2.0 * spec.beta3 * (x.x_s.array() - spec.alpha * spec.capacity).matrix();
  return g;
}

double control_violation(const ControlDecision& x, const BatterySpec& spec) {
  const Index H = x.horizon();
  double worst = 0.0;
  auto box = [&worst](const Vector& v, double hi) {
    worst = std::max(worst, (-v).maxCoeff());
    worst = std::max(worst, (v.array() - hi).maxCoeff());
  };
  box(x.x_in, spec.c_in);
  box(x.x_out, spec.c_out);
  box(x.x_s, spec.capacity);
  worst = std::max(worst, std::abs(x.x_s(0) - spec.b_init));
  for (Index j = 0; j + 1 < H; ++j) {
    const double r = x.x_s(j + 1) - x.x_s(j) + x.x_out(j) / spec.eta_out -
                     spec.eta_in * x.x_in(j);
    worst = std::max(worst, std::abs(r));
  }
  const double end = x.x_s(H - 1) + spec.eta_in * x.x_in(H - 1) -
                     x.x_out(H - 1) / spec.eta_out;
  worst = std::max({worst, -end, end - spec.capacity});
  return worst;
}

}  // namespace privctrl
