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

// Batched dense-data QP solver (primal-dual interior point with
// Mehrotra predictor-corrector) and reverse-mode sensitivities of the
// optimal primal with respect to the demand-dependent right-hand side.

#ifndef PRIVCTRL_QP_ENGINE_HPP_
#define PRIVCTRL_QP_ENGINE_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "privctrl/battery_qp.hpp"
#include "privctrl/common.hpp"

namespace privctrl {

struct SolverConfig {
  double tol = 1e-8;
  int max_iter = 100;
  int threads = 1;
  /// Active-set classification margin used by vjp_demand.
  double degenerate_margin = 1e-6;
  /// Re-solve the equality-constrained problem on the identified active set
  /// once the interior point method has converged.
  bool polish = true;

  void validate() const;
  bool operator==(const SolverConfig&) const = default;
};

enum class QpStatus { kOptimal, kMaxIter, kInfeasible };

const char* to_string(QpStatus status);

/// Scaled KKT residuals. Stationarity is relative to 1 + |q|_inf, primal
/// feasibility relative to 1 + max(|b|_inf, |h|_inf); complementarity is
/// max_i |lambda_i (h - Gx)_i| and dual feasibility max_i (-lambda_i)_+.
struct KktResiduals {
  double primal = 0.0;
  double dual = 0.0;
  double complementarity = 0.0;
  double stationarity = 0.0;

  double max() const;
};

KktResiduals kkt_residuals(const CanonicalQP& qp, const Vector& x, const Vector& lambda,
                           const Vector& nu);

struct QpSolution {
  Vector x;
  Vector lambda;  // inequality duals, >= 0
  Vector nu;      // equality duals
  QpStatus status = QpStatus::kMaxIter;
  double kkt_residual = 0.0;
  KktResiduals residuals;
  int iterations = 0;
  bool polished = false;
  /// Infeasibility certificate or iteration-limit description.
  std::string note;

  bool optimal() const { return status == QpStatus::kOptimal; }
};

/// Checks shapes and that Q is symmetric positive semidefinite.
void validate_qp(const CanonicalQP& qp);

QpSolution solve(const CanonicalQP& qp, const SolverConfig& cfg = {});

/// Solves every instance on cfg.threads OpenMP workers; results are returned
/// in input order and do not depend on the thread count.
std::vector<QpSolution> solve_batch(std::span<const CanonicalQP> qps,
                                    const SolverConfig& cfg = {});

/// Single-threaded reference for solve_batch.
std::vector<QpSolution> solve_batch_serial(std::span<const CanonicalQP> qps,
                                           const SolverConfig& cfg = {});

/// An inequality that is neither clearly active nor clearly inactive.
class DegenerateActiveSet : public Error {
 public:
  DegenerateActiveSet(Index row, double slack, double lambda);
  Index row() const { return row_; }

 private:
  Index row_;
};

/// The reduced KKT matrix cannot be inverted on the demand directions.
class SingularKkt : public Error {
 public:
  using Error::Error;
};

enum class RowState { kActive, kInactive };

/// Classifies each inequality with the strict-complementarity margin; throws
/// DegenerateActiveSet on the first ambiguous row. A tight row with a zero
/// multiplier and a demand-free right-hand side counts as inactive when the
/// solution map does not move along its normal.
std::vector<RowState> classify_active_set(const CanonicalQP& qp, const QpSolution& sol,
                                          double margin);

/// cotangent' * dx*/d(demand), length H. Requires an optimal solution.
Vector vjp_demand(const CanonicalQP& qp, const QpSolution& sol, const Vector& cotangent,
                  const SolverConfig& cfg = {});

struct BenchRow {
  int threads = 1;
  std::size_t batch = 0;
  double mean_s = 0.0;
  double sd_s = 0.0;  // sample standard deviation over repeats
};

/// Wall time of solve_batch on `batch_size` synthetic epigraph instances of
/// the given horizon, once per entry of `thread_counts`.
std::vector<BenchRow> bench(Index horizon, std::size_t batch_size,
                            std::span<const int> thread_counts, int repeats = 8,
                            std::uint64_t seed = 1);

/// Columns threads, batch, mean_s, sd_s.
void write_bench_csv(const std::vector<BenchRow>& rows, const std::filesystem::path& path);

}  // namespace privctrl

#endif  // PRIVCTRL_QP_ENGINE_HPP_
