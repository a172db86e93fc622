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

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "kkt_solver.hpp"
#include "privctrl/qp_engine.hpp"

namespace privctrl {

namespace {

using detail::KktSolver;
using detail::SpMat;
using Pattern = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

constexpr double kRegularization = 1e-11;
constexpr double kComplementarityFloor = 1e-15;
constexpr int kMaxExtraIterations = 8;
constexpr double kMaxBarrierWeight = 1e20;
constexpr double kMaxRegularization = 1e-5;
constexpr int kMaxPolishPasses = 25;
constexpr double kPenalty = 1e2;
constexpr int kMultiplierSweeps = 30;

struct SparseRow {
  std::vector<std::pair<Index, double>> entries;
};

std::vector<SparseRow> sparse_rows(const Matrix& M) {
  std::vector<SparseRow> rows(static_cast<std::size_t>(M.rows()));
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) {
      if (M(i, j) != 0.0) rows[static_cast<std::size_t>(i)].entries.emplace_back(j, M(i, j));
    }
  }
  return rows;
}

// P + G' diag(d) G using the row sparsity of G.
void accumulate_hessian(const Matrix& P, const std::vector<SparseRow>& g_rows,
                        const Vector& d, Matrix& H) {
  H = P;
  for (std::size_t i = 0; i < g_rows.size(); ++i) {
    const double di = d(static_cast<Index>(i));
    for (const auto& [a, va] : g_rows[i].entries) {
      for (const auto& [b, vb] : g_rows[i].entries) H(a, b) += di * va * vb;
    }
  }
}

Pattern hessian_pattern(const Matrix& P, const std::vector<SparseRow>& g_rows) {
  Pattern pat = (P.array() != 0.0);
  for (const auto& row : g_rows) {
    for (const auto& [a, va] : row.entries) {
      for (const auto& [b, vb] : row.entries) pat(a, b) = true;
    }
  }
  return pat;
}

// Largest step in (0, 1] keeping v + t dv >= 0.
double max_step(const Vector& v, const Vector& dv) {
  double t = 1.0;
  for (Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) t = std::min(t, -v(i) / dv(i));
  }
  return t;
}

// Shared by the public dense entry point and the solver's sparse copies.
template <typename MatA, typename MatG>
KktResiduals residuals_impl(const CanonicalQP& qp, const MatA& A, const MatG& G,
                            const Vector& x, const Vector& lambda, const Vector& nu) {
  KktResiduals r;
  const Vector slack = qp.h - G * x;
  const double q_scale = 1.0 + qp.q.lpNorm<Eigen::Infinity>();
  const double rhs_scale =
      1.0 + std::max(qp.b.size() ? qp.b.lpNorm<Eigen::Infinity>() : 0.0,
                     qp.h.size() ? qp.h.lpNorm<Eigen::Infinity>() : 0.0);

  double primal = qp.b.size() ? (A * x - qp.b).template lpNorm<Eigen::Infinity>() : 0.0;
  if (slack.size()) primal = std::max(primal, (-slack).maxCoeff());
  r.primal = std::max(primal, 0.0) / rhs_scale;
  r.dual = lambda.size() ? std::max(0.0, (-lambda).maxCoeff()) : 0.0;
  r.complementarity =
      lambda.size() ? lambda.cwiseProduct(slack).lpNorm<Eigen::Infinity>() : 0.0;
  Vector stat = 2.0 * (qp.Q * x) + qp.q;
  if (nu.size()) stat += A.transpose() * nu;
  if (lambda.size()) stat += G.transpose() * lambda;
  r.stationarity = stat.lpNorm<Eigen::Infinity>() / q_scale;
  return r;
}

struct EqpResult {
  Vector x;
  Vector nu;
  Vector lambda;  // full length, zero off the working set
};

// Borrowed from the interior-point solve: the KKT pattern there already
// covers every G'G term, so the equality subproblems reuse its ordering.
struct PolishContext {
  const CanonicalQP& qp;
  const Matrix& P;
  const std::vector<SparseRow>& g_rows;
  const SpMat& A;
  const SpMat& G;
  KktSolver& kkt;
};

// Equality-constrained QP with the working rows of G held as equalities,
// solved by the method of multipliers. The penalty dwarfs the battery
// curvature, so the multipliers settle in a few sweeps, yet it is small
// enough that the free directions keep full accuracy.
bool solve_eqp(const PolishContext& ctx, const std::vector<bool>& in_set, const Vector& lambda0,
               EqpResult& out) {
  const CanonicalQP& qp = ctx.qp;
  const Index n = qp.num_vars(), p = qp.num_eq(), m = qp.num_ineq();
  Vector weight = Vector::Zero(m);
  for (Index i = 0; i < m; ++i) {
    if (in_set[static_cast<std::size_t>(i)]) weight(i) = kPenalty;
  }
  Matrix H;
  accumulate_hessian(ctx.P, ctx.g_rows, weight, H);
  if (!ctx.kkt.factor(H, kRegularization)) return false;

  Vector lambda = lambda0.cwiseProduct((weight.array() > 0.0).cast<double>().matrix());
  const double feas_tol = 1e-15 * (1.0 + qp.h.lpNorm<Eigen::Infinity>());
  Vector z;
  for (int sweep = 0; sweep < kMultiplierSweeps; ++sweep) {
    Vector rhs(n + p);
    rhs << -qp.q - ctx.G.transpose() * (lambda - weight.cwiseProduct(qp.h)), qp.b;
    z = ctx.kkt.solve(rhs, 6);
    const Vector viol = weight.cwiseProduct(ctx.G * z.head(n) - qp.h);
    lambda += viol;
    if (viol.lpNorm<Eigen::Infinity>() <= kPenalty * feas_tol) break;
  }
  out.x = z.head(n);
  out.nu = z.tail(p);
  out.lambda = std::move(lambda);
  return z.allFinite();
}

// Primal-dual active-set refinement seeded with the rows where the interior
// point multiplier exceeds the slack. Each pass adds the violated rows or,
// failing that, drops the row with the most negative multiplier; when working
// rows are dependent this sheds the redundant ones without moving x. A candidate is accepted when it meets
// tol or beats the interior-point residual.
bool polish(const PolishContext& ctx, double tol, QpSolution& sol) {
  const CanonicalQP& qp = ctx.qp;
  const SpMat& A = ctx.A;
  const SpMat& G = ctx.G;
  const Index m = qp.num_ineq();
  const double feas_tol = 1e-12 * (1.0 + qp.h.lpNorm<Eigen::Infinity>());
  const Vector slack0 = qp.h - G * sol.x;
  std::vector<bool> in_set(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) in_set[static_cast<std::size_t>(i)] = sol.lambda(i) > slack0(i);

  bool improved = false;
  for (int pass = 0; pass < kMaxPolishPasses; ++pass) {
    std::vector<Index> working;
    for (Index i = 0; i < m; ++i) {
      if (in_set[static_cast<std::size_t>(i)]) working.push_back(i);
    }
    EqpResult eqp;
    if (!solve_eqp(ctx, in_set, sol.lambda, eqp)) break;

    // Dependent working rows leave the reduced multipliers non-unique; the
    // interior-point multipliers restricted to the working set are a second
    // candidate.
    QpSolution cand = sol;
    cand.x = eqp.x;
    cand.nu = eqp.nu;
    cand.lambda = eqp.lambda;
    cand.residuals = residuals_impl(qp, A, G, cand.x, cand.lambda, cand.nu);
    cand.kkt_residual = cand.residuals.max();

    QpSolution alt = cand;
    alt.nu = sol.nu;
    alt.lambda.setZero();
    for (Index i : working) alt.lambda(i) = std::max(sol.lambda(i), 0.0);
    alt.residuals = residuals_impl(qp, A, G, alt.x, alt.lambda, alt.nu);
    alt.kkt_residual = alt.residuals.max();
    if (alt.kkt_residual < cand.kkt_residual) cand = std::move(alt);

    if (cand.kkt_residual <= std::max(tol, sol.kkt_residual) &&
        (!improved || cand.kkt_residual <= sol.kkt_residual || cand.residuals.dual == 0.0)) {
      cand.polished = true;
      sol = std::move(cand);
      improved = true;
    }

    // Add every violated row; otherwise drop the most negative multiplier.
    const Vector slack = qp.h - G * eqp.x;
    bool changed = false;
    for (Index i = 0; i < m; ++i) {
      if (!in_set[static_cast<std::size_t>(i)] && slack(i) < -feas_tol) {
        in_set[static_cast<std::size_t>(i)] = true;
        changed = true;
      }
    }
    if (!changed) {
      Index worst = -1;
      for (Index i : working) {
        if (eqp.lambda(i) < 0.0 && (worst < 0 || eqp.lambda(i) < eqp.lambda(worst))) worst = i;
      }
      if (worst >= 0) {
        in_set[static_cast<std::size_t>(worst)] = false;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return improved;
}

}  // namespace

void SolverConfig::validate() const {
  if (!(tol > 0.0)) throw InvalidArgument("solver tol must be positive");
  if (max_iter < 1) throw InvalidArgument("solver max_iter must be at least 1");
  if (threads < 1) throw InvalidArgument("solver threads must be at least 1");
  if (!(degenerate_margin > 0.0)) throw InvalidArgument("degenerate_margin must be positive");
}

const char* to_string(QpStatus status) {
  switch (status) {
    case QpStatus::kOptimal: return "optimal";
    case QpStatus::kMaxIter: return "max_iter";
    case QpStatus::kInfeasible: return "infeasible";
  }
  return "unknown";
}

double KktResiduals::max() const {
  return std::max({primal, dual, complementarity, stationarity});
}

KktResiduals kkt_residuals(const CanonicalQP& qp, const Vector& x, const Vector& lambda,
                           const Vector& nu) {
  return residuals_impl(qp, qp.A, qp.G, x, lambda, nu);
}

void validate_qp(const CanonicalQP& qp) {
  const Index n = qp.q.size();
  if (n == 0) throw InvalidArgument("QP has no decision variables");
  if (qp.Q.rows() != n || qp.Q.cols() != n) throw InvalidArgument("Q has wrong shape");
  if (qp.A.rows() != qp.b.size() || (qp.A.rows() > 0 && qp.A.cols() != n)) {
    throw InvalidArgument("A/b have inconsistent shapes");
  }
  if (qp.G.rows() != qp.h.size() || (qp.G.rows() > 0 && qp.G.cols() != n)) {
    throw InvalidArgument("G/h have inconsistent shapes");
  }
  for (Index r : qp.demand_rows) {
    if (r < 0 || r >= qp.h.size()) throw InvalidArgument("demand row out of range");
  }
  if (!qp.Q.isApprox(qp.Q.transpose(), 1e-12) && (qp.Q - qp.Q.transpose()).norm() > 1e-14) {
    throw InvalidArgument("Q is not symmetric");
  }
  if ((qp.Q.diagonal().array() < 0.0).any()) {
    throw InvalidArgument("Q has a negative diagonal entry");
  }
  const Matrix off = qp.Q - Matrix(qp.Q.diagonal().asDiagonal());
  if (off.lpNorm<Eigen::Infinity>() > 0.0) {
    Eigen::LDLT<Matrix> ldlt(qp.Q);
    if (ldlt.info() != Eigen::Success ||
        (ldlt.vectorD().array() < -1e-12 * (1.0 + qp.Q.norm())).any()) {
      throw InvalidArgument("Q is not positive semidefinite");
    }
  }
}

QpSolution solve(const CanonicalQP& qp, const SolverConfig& cfg) {
  validate_qp(qp);
  cfg.validate();
  const Index n = qp.num_vars(), p = qp.num_eq(), m = qp.num_ineq();
  const Matrix P = 2.0 * qp.Q;
  const auto g_rows = sparse_rows(qp.G);
  const SpMat A = qp.A.sparseView();
  const SpMat G = qp.G.sparseView();
  KktSolver kkt(hessian_pattern(P, g_rows), A);

  QpSolution sol;
  Matrix H(n, n);

  // Starting point: least-squares fit of the inequalities with unit weights.
  accumulate_hessian(P, g_rows, Vector::Ones(m), H);
  kkt.factor(H, kRegularization);
  Vector rhs(n + p);
  rhs << -qp.q + G.transpose() * qp.h, qp.b;
  Vector z = kkt.solve(rhs);
  Vector x = z.head(n);
  Vector nu = z.tail(p);
  Vector s = qp.h - G * x;
  const double s_min = m ? s.minCoeff() : 1.0;
  if (s_min < 1.0) s.array() += 1.0 - s_min;
  Vector lambda = Vector::Ones(m);

  QpSolution best;
  best.kkt_residual = std::numeric_limits<double>::infinity();

  // Once the residuals meet tol, keep iterating while complementarity keeps
  // shrinking so that active and inactive rows separate cleanly for polishing
  // and differentiation.
  bool converged = false;
  int extra = 0;
  std::string stall_note;
  double last_comp = std::numeric_limits<double>::infinity();

  for (int iter = 0; iter <= cfg.max_iter; ++iter) {
    const KktResiduals res = residuals_impl(qp, A, G, x, lambda, nu);
    const bool better =
        converged ? (res.max() <= cfg.tol &&
                     res.complementarity < best.residuals.complementarity)
                  : res.max() < best.kkt_residual;
    if (better) {
      best.x = x;
      best.lambda = lambda;
      best.nu = nu;
      best.residuals = res;
      best.kkt_residual = res.max();
      best.iterations = iter;
    }
    if (!converged && res.max() <= cfg.tol) {
      converged = true;
      best.status = QpStatus::kOptimal;
    }
    if (converged) {
      if (res.complementarity <= kComplementarityFloor || extra >= kMaxExtraIterations ||
          res.complementarity > 0.5 * last_comp) {
        break;
      }
      last_comp = res.complementarity;
      ++extra;
    }
    if (iter == cfg.max_iter) break;

    // Farkas check: a diverging dual iterate that certifies A x = b, G x <= h
    // has no solution.
    const double dual_norm = std::max(m ? lambda.lpNorm<Eigen::Infinity>() : 0.0,
                                      p ? nu.lpNorm<Eigen::Infinity>() : 0.0);
    if (dual_norm > 1e8) {
      const Vector lh = lambda / dual_norm;
      const Vector nh = nu / dual_norm;
      const double ray = (A.transpose() * nh + G.transpose() * lh).lpNorm<Eigen::Infinity>();
      const double gap = qp.b.dot(nh) + qp.h.dot(lh);
      if (ray < 1e-6 && gap < -1e-8) {
        std::ostringstream note;
        note << "dual ray with |A'nu + G'lambda|_inf = " << ray
             << " and b'nu + h'lambda = " << gap << " (normalized)";
        best.status = QpStatus::kInfeasible;
        best.note = note.str();
        best.iterations = iter;
        return best;
      }
    }

    const Vector r_d = P * x + qp.q + A.transpose() * nu + G.transpose() * lambda;
    const Vector r_e = A * x - qp.b;
    const Vector r_i = G * x + s - qp.h;
    const double mu = m ? s.dot(lambda) / static_cast<double>(m) : 0.0;

    // Rows pinned from both sides (a zero-width box) drive s to zero; cap
    // their weight so the Newton matrix stays finite.
    const Vector d = lambda.cwiseQuotient(s).cwiseMin(kMaxBarrierWeight);
    accumulate_hessian(P, g_rows, d, H);
    // Near the solution the weights span twenty orders of magnitude and a
    // pivot can cancel to zero; retry with stronger regularization and let
    // iterative refinement recover the unregularized direction.
    bool factored = false;
    for (double delta = kRegularization; delta <= kMaxRegularization && !factored;
         delta *= 1e3) {
      factored = kkt.factor(H, delta);
    }
    if (!factored) {
      stall_note = "Newton system factorization failed";
      break;
    }

    auto newton = [&](const Vector& r_c, Vector& dx, Vector& dnu, Vector& dlam, Vector& ds) {
      const Vector w = (lambda.cwiseProduct(r_i) - r_c).cwiseQuotient(s);
      Vector rhs_k(n + p);
      rhs_k << -r_d - G.transpose() * w, -r_e;
      const Vector sol_k = kkt.solve(rhs_k, 2);
      dx = sol_k.head(n);
      dnu = sol_k.tail(p);
      const Vector g_dx = G * dx;
      dlam = d.cwiseProduct(g_dx) + w;
      ds = -r_i - g_dx;
    };

    Vector dx, dnu, dlam, ds;
    newton(s.cwiseProduct(lambda), dx, dnu, dlam, ds);
    const double a_aff = std::min(max_step(s, ds), max_step(lambda, dlam));
    const double mu_aff =
        m ? (s + a_aff * ds).dot(lambda + a_aff * dlam) / static_cast<double>(m) : 0.0;
    const double sigma = mu > 0.0 ? std::pow(mu_aff / mu, 3) : 0.0;

    const Vector r_c = s.cwiseProduct(lambda) + ds.cwiseProduct(dlam) -
                       Vector::Constant(m, sigma * mu);
    newton(r_c, dx, dnu, dlam, ds);
    const double step =
        std::min(1.0, 0.99 * std::min(max_step(s, ds), max_step(lambda, dlam)));

    x += step * dx;
    nu += step * dnu;
    lambda += step * dlam;
    s += step * ds;
    // Keep strictly interior.
    s = s.cwiseMax(std::numeric_limits<double>::min());
    lambda = lambda.cwiseMax(std::numeric_limits<double>::min());
  }

  sol = std::move(best);
  // A stall close to the solution usually means the active set is already
  // clear (a pinned row drives its weight past what the remaining curvature
  // can absorb); solving on the active set then finishes the job. The
  // polished point is only kept when it meets tol.
  if (sol.status != QpStatus::kOptimal && cfg.polish && m > 0 &&
      polish(PolishContext{qp, P, g_rows, A, G, kkt}, cfg.tol, sol) && sol.kkt_residual <= cfg.tol) {
    sol.status = QpStatus::kOptimal;
    return sol;
  }
  if (sol.status != QpStatus::kOptimal) {
    sol.status = QpStatus::kMaxIter;
    std::ostringstream note;
    note << (stall_note.empty() ? "iteration limit reached" : stall_note)
         << "; best KKT residual " << sol.kkt_residual;
    sol.note = note.str();
  }
  if (cfg.polish && sol.status == QpStatus::kOptimal && m > 0) polish(PolishContext{qp, P, g_rows, A, G, kkt}, cfg.tol, sol);
  return sol;
}

}  // namespace privctrl
