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

// Minimax training of the filter against the adversary, with the battery
// controller differentiated in the loop.
//
// One iteration on a batch (d, y) with a single noise draw eps:
//   adversary:  psi <- psi - lr_a grad_psi CE(f_psi(d~), y)
//   privacy:    G^  <- G - lr_g grad_G [lambda_a CE(f_psi(d~), 1 - y) + kappa R(G)]
//   utility:    G   <- G^ - lr_g grad_G L_u(x*(d~(G^)), d)
// where the generator maximizes the adversary loss through the
// non-saturating -log(1 - f) form and L_u is priced against raw demand.

#ifndef PRIVCTRL_TRAINER_HPP_
#define PRIVCTRL_TRAINER_HPP_

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "privctrl/adversary.hpp"
#include "privctrl/battery_qp.hpp"
#include "privctrl/data.hpp"
#include "privctrl/filter.hpp"
#include "privctrl/qp_engine.hpp"

namespace privctrl {

enum class ScheduleMode { kStepDecay, kDiminishing };

const char* to_string(ScheduleMode mode);
ScheduleMode schedule_mode_from_string(const std::string& name);

struct TrainConfig {
  double lambda_a = 32.0;
  double kappa = 1e-3;
  /// Weight of the V term of the regularizer; defaults to kappa.
  std::optional<double> kappa_v;
  double lr_adversary = 1e-3;
  double lr_generator = 0.1;
  double lr_decay = 0.2;  // fraction removed every decay_interval steps
  int decay_interval = 100;
  std::size_t batch_size = 32;
  int max_steps = 600;
  double convergence_tol = 1e-5;
  int convergence_window = 10;
  ScheduleMode schedule = ScheduleMode::kStepDecay;
  PenaltyForm penalty_form = PenaltyForm::kExpected;
  std::uint64_t seed = 1;
  int threads = 1;
  /// Evaluate on the test split every this many steps; 0 disables.
  int eval_every = 0;

  void validate() const;
  double kappa_v_value() const { return kappa_v.value_or(kappa); }
  /// Generator learning rate at 1-based step k.
  double generator_lr(int step) const;
  bool operator==(const TrainConfig&) const = default;
};

/// Context shared by the generator steps.
struct ControlProblem {
  BatterySpec spec;
  PriceSchedule price;
  SolverConfig solver;
};

// ---- adversary --------------------------------------------------------------

/// One SGD step on the batch-mean cross-entropy of the privatized batch.
MlpParams adversary_update(const MlpParams& params, const FilterWeights& w, const Batch& batch,
                           const Matrix& eps, double lr, int threads = 1,
                           double* loss = nullptr);

// ---- step1: privacy -----------------------------------------------------------

/// Batch mean of lambda_a * CE(f(d~), flipped y) plus the weighted regularizer.
double step1_objective(const FilterWeights& w, const MlpParams& params, const Batch& batch,
                       const Matrix& eps, const TrainConfig& cfg,
                       const Eigen::Vector2d& label_probs);

FilterWeights step1_gradient(const FilterWeights& w, const MlpParams& params, const Batch& batch,
                             const Matrix& eps, const TrainConfig& cfg,
                             const Eigen::Vector2d& label_probs);

FilterWeights step1_update(const FilterWeights& w, const MlpParams& params, const Batch& batch,
                           const Matrix& eps, const TrainConfig& cfg,
                           const Eigen::Vector2d& label_probs, double lr);

// ---- step2: controls on privatized demand ------------------------------------

struct ControlSample {
  Vector demand_tilde;
  CanonicalQP qp;
  QpSolution solution;
};

std::vector<ControlSample> step2_solve_controls(const FilterWeights& w, const Batch& batch,
                                                const Matrix& eps, const ControlProblem& prob);

// ---- step3: utility -----------------------------------------------------------

struct UtilityGradient {
  FilterWeights grad;  // mean over the records that were used
  double utility_loss = 0.0;  // mean L_u over solved records
  std::size_t used = 0;
  std::size_t skipped = 0;
  std::vector<std::string> skip_reasons;
};

UtilityGradient step3_gradient(const FilterWeights& w, const Batch& batch, const Matrix& eps,
                               const std::vector<ControlSample>& samples,
                               const ControlProblem& prob);

/// Mean over the batch of L_u(x*(d~), d) with eps and y held fixed.
double utility_objective(const FilterWeights& w, const Batch& batch, const Matrix& eps,
                         const ControlProblem& prob);

// ---- full loop ------------------------------------------------------------------

struct StepRecord {
  int step = 0;
  double adversary_loss = 0.0;
  double utility_loss = 0.0;
  double distortion = 0.0;
  double lr_generator = 0.0;
  std::size_t skipped = 0;
  double param_delta = 0.0;
  double test_accuracy = std::numeric_limits<double>::quiet_NaN();
  double utility_gap_pct = std::numeric_limits<double>::quiet_NaN();
};

struct TrainLog {
  std::vector<StepRecord> steps;
  bool converged = false;
};

struct TrainResult {
  FilterWeights filter;
  MlpParams adversary;
  TrainLog log;
};

struct TrainInit {
  FilterWeights filter;
  MlpParams adversary;
};

/// Called after every step with the updated weights.
using StepCallback =
    std::function<void(const StepRecord&, const FilterWeights&, const MlpParams&)>;

/// Seeds derived from cfg.seed initialize both networks unless `init` is
/// given. `test` is only read when cfg.eval_every > 0.
TrainResult train(const Dataset& train_set, const Dataset* test, const ControlProblem& prob,
                  const TrainConfig& cfg, const std::optional<TrainInit>& init = std::nullopt,
                  const StepCallback& on_step = {});

/// Adversary trained by SGD on raw demand (filter fixed at zero) with the
/// same batch size, learning rate and step budget as cfg.
MlpParams train_raw_adversary(const Dataset& train_set, const TrainConfig& cfg, int steps);

// ---- evaluation -------------------------------------------------------------------

struct RecordEval {
  double raw_cost = 0.0;   // L_u(x*(d), d)
  double priv_cost = 0.0;  // L_u(x*(d~), d)
  Vector x_raw;            // [x_in; x_out; x_s]
  Vector x_priv;
  bool solved = false;
};

struct EvalMetrics {
  double priv_accuracy = 0.0;
  double utility_gap_pct = 0.0;  // mean over records of (priv - raw) / raw * 100
  double distortion = 0.0;       // mean |d~ - d|^2
  std::size_t gap_records = 0;   // records entering the gap mean
  std::vector<RecordEval> records;
};

/// Every record of `ds` passed through the filter, one noise draw each.
Dataset privatize(const FilterWeights& w, const Dataset& ds, std::uint64_t eps_seed);

/// Test accuracy of a fresh adversary trained on privatized training data
/// with the filter frozen (same initialization, batch size and learning rate
/// as the raw baseline). Unlike the co-trained adversary it gets to adapt to
/// the final filter.
double retrained_accuracy(const FilterWeights& w, const Dataset& train_set, const Dataset& test,
                          const TrainConfig& cfg, int steps, std::uint64_t eps_seed);

/// Privatizes `test` with noise drawn from `eps_seed`, scores the adversary
/// on it and compares controller costs against the raw-demand optimum.
EvalMetrics evaluate(const FilterWeights& w, const MlpParams& params, const Dataset& test,
                     const ControlProblem& prob, std::uint64_t eps_seed,
                     bool keep_records = false);

// ---- convergence probe ------------------------------------------------------------

/// Convex surrogate in a flat parameter vector g: linear adversary term
/// a'g and quadratic utility term 1/2 sum_i c_i (g_i - u_i)^2.
struct Surrogate {
  Vector a;
  Vector c;  // >= 0
  Vector u;
  Vector start;

  double adversary_loss(const Vector& g) const { return a.dot(g); }
  double utility_loss(const Vector& g) const;
  double loss(const Vector& g) const { return adversary_loss(g) + utility_loss(g); }
  /// Minimizer; requires c > 0 wherever a != 0.
  Vector optimum() const;
};

Surrogate make_surrogate(Index dim, std::uint64_t seed);

struct ProbeTrace {
  std::vector<double> min_gap;  // min over iterates 0..k of loss(g^_k) - loss*
  std::vector<double> bound;    // (r^2 + delta^2 sum eta^2) / (2 sum eta)
  double initial_gap = 0.0;
};

/// Runs the two-stage update (adversary gradient, then utility gradient at
/// the intermediate point) for `steps` iterations with eta_k = eta0 / k.
ProbeTrace convergence_probe(const Surrogate& s, int steps, double eta0);

}  // namespace privctrl

#endif  // PRIVCTRL_TRAINER_HPP_
