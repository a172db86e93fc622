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


// Shared fixtures and independent reference computations for the tests.

#ifndef PRIVCTRL_TESTS_SUPPORT_HPP_
#define PRIVCTRL_TESTS_SUPPORT_HPP_

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include "privctrl/battery_qp.hpp"
#include "privctrl/data.hpp"
#include "privctrl/qp_engine.hpp"

namespace privctrl::testing {

inline double rel_err(const Vector& a, const Vector& b, double floor = 1e-12) {
  return (a - b).norm() / std::max(b.norm(), floor);
}

inline double rel_err(double a, double b, double floor = 1e-12) {
  return std::abs(a - b) / std::max(std::abs(b), floor);
}

/// Central differences of a scalar function.
inline Vector central_diff(const std::function<double(const Vector&)>& f, const Vector& x,
                           double h) {
  Vector g(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    g(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

/// Battery parameters drawn inside their validity ranges.
inline BatterySpec random_spec(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  BatterySpec s;
  s.capacity = 0.5 + 7.5 * u(rng);
  s.alpha = 0.1 + 0.8 * u(rng);
  s.beta1 = std::pow(10.0, -6.0 + 3.0 * u(rng));
  s.beta2 = std::pow(10.0, -6.0 + 3.0 * u(rng));
  s.beta3 = std::pow(10.0, -6.0 + 3.0 * u(rng));
  s.eta_in = 0.8 + 0.2 * u(rng);
  s.eta_out = 0.8 + 0.2 * u(rng);
  s.c_in = 0.3 + 2.7 * u(rng);
  s.c_out = 0.3 + 2.7 * u(rng);
  s.b_init = s.capacity * u(rng);
  return s;
}

inline PriceSchedule random_prices(std::mt19937_64& rng, Index H) {
  std::uniform_real_distribution<double> u(0.05, 0.6);
  std::vector<PriceTier> tiers;
  for (Index j = 0; j < H; ++j) tiers.push_back({j, j + 1, u(rng)});
  return build_tou_prices(H, tiers);
}

/// Residential-looking demand with an evening peak and optional midday dip.
inline Vector random_demand(std::mt19937_64& rng, Index H, bool allow_negative) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector d(H);
  const double peak = 1.0 + 3.0 * u(rng);
  const double solar = allow_negative ? 3.0 * u(rng) : 0.0;
  for (Index j = 0; j < H; ++j) {
    const double hour = 24.0 * static_cast<double>(j) / static_cast<double>(H);
    double v = 0.8 + 0.3 * n(rng);
    if (hour >= 16.0 && hour < 21.0) v += peak;
    if (hour >= 9.0 && hour < 16.0) v -= solar * std::sin((hour - 9.0) / 7.0 * M_PI);
    d(j) = allow_negative ? v : std::max(v, 0.05);
  }
  return d;
}

struct Reference {
  Vector x;
  double objective = 0.0;  // x'Qx + q'x + objective_constant
  double gap_bound = 0.0;  // m / t at termination
  int newton_steps = 0;
  bool feasible = true;
};

namespace detail {

// Minimizes t f(w) - sum log(h - G w) over w from a strictly feasible start
// by damped Newton, where f(w) = 1/2 w'Pw + q'w.
inline int barrier_center(const Matrix& P, const Vector& q, const Matrix& G, const Vector& h,
                          double t, Vector& w,
                          const std::function<bool(const Vector&)>& done = {}) {
  const auto phi = [&](const Vector& v) {
    const Vector slack = h - G * v;
    if (slack.minCoeff() <= 0.0) return std::numeric_limits<double>::infinity();
    return t * (0.5 * v.dot(P * v) + q.dot(v)) - slack.array().log().sum();
  };
  int steps = 0;
  for (; steps < 50; ++steps) {
    const Vector inv = (h - G * w).cwiseInverse();
    const Vector grad = t * (P * w + q) + G.transpose() * inv;
    const Matrix hess = t * P + G.transpose() * inv.cwiseAbs2().asDiagonal() * G;
    const Eigen::LDLT<Matrix> ldlt(hess);
    const Vector dw = -ldlt.solve(grad);
    const double decrement = -grad.dot(dw);
    if (decrement / 2.0 <= 1e-9) break;
    double step = 1.0;
    const double f0 = phi(w);
    while (phi(w + step * dw) > f0 - 0.25 * step * decrement) {
      step *= 0.5;
      if (step < 1e-14) return steps;
    }
    w += step * dw;
    if (done && done(w)) return steps + 1;
  }
  return steps;
}

}  // namespace detail

/// Primal log-barrier reference solver. Equalities are eliminated through a
/// nullspace basis (x = x0 + Z w); a phase-one barrier finds a strictly
/// feasible point, then the barrier parameter grows until the duality gap
/// bound m / t falls below `gap_tol` times the objective scale. Shares no
/// code with the interior point solver under test.
inline Reference barrier_reference(const CanonicalQP& qp, double gap_tol = 1e-9) {
  Eigen::FullPivLU<Matrix> lu(qp.A);
  const Vector x0 = qp.A.completeOrthogonalDecomposition().solve(qp.b);
  const Matrix Z = lu.kernel();
  const Index k = Z.cols();
  const Matrix P = Z.transpose() * (2.0 * qp.Q) * Z;
  const Vector q = Z.transpose() * (2.0 * qp.Q * x0 + qp.q);
  // A loose box |x_i| <= R keeps the barrier bounded below along the
  // unbounded epigraph directions without touching the optimum.
  const double R = 1e3 * (1.0 + qp.h.lpNorm<Eigen::Infinity>() + qp.b.lpNorm<Eigen::Infinity>());
  const Index n = qp.num_vars();
  Matrix Gx(qp.num_ineq() + 2 * n, n);
  Gx << qp.G, Matrix::Identity(n, n), -Matrix::Identity(n, n);
  Vector hx(Gx.rows());
  hx << qp.h, Vector::Constant(2 * n, R);
  const Index m = Gx.rows();
  const Matrix G = Gx * Z;
  const Vector h = hx - Gx * x0;

  Reference ref;
  // Phase one over (w, s): minimize s subject to G w - s <= h.
  Vector w = Vector::Zero(k);
  {
    Matrix G1(m, k + 1);
    G1 << G, -Vector::Ones(m);
    Vector q1 = Vector::Zero(k + 1);
    q1(k) = 1.0;
    Vector v(k + 1);
    v << w, std::max((G * w - h).maxCoeff(), 0.0) + 1.0;
    const Matrix P1 = Matrix::Zero(k + 1, k + 1);
    for (double t = 1.0; v(k) >= -1e-9 && t < 1e14; t *= 10.0) {
      ref.newton_steps += detail::barrier_center(P1, q1, G1, h, t, v,
                                                 [k](const Vector& u) { return u(k) < 0.0; });
      if (v(k) < 0.0) break;
      if (static_cast<double>(m) / t < 1e-12 && v(k) > 0.0) break;
    }
    if (v(k) >= 0.0) {
      ref.feasible = false;
      return ref;
    }
    w = v.head(k);
  }
  // Phase two.
  double t = 1.0;
  for (;;) {
    ref.newton_steps += detail::barrier_center(P, q, G, h, t, w);
    const double f = 0.5 * w.dot(P * w) + q.dot(w);
    ref.gap_bound = static_cast<double>(m) / t;
    if (ref.gap_bound <= gap_tol * std::max(1.0, std::abs(f))) break;
    t *= 50.0;
  }
  ref.x = x0 + Z * w;
  ref.objective = qp.objective(ref.x) + qp.objective_constant;
  return ref;
}

}  // namespace privctrl::testing

#endif  // PRIVCTRL_TESTS_SUPPORT_HPP_
