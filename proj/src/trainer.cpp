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

#include "privctrl/trainer.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <random>

namespace privctrl {

namespace {

// Sub-stream tags for derive_seed.
enum Stream : std::uint64_t {
  kFilterInit = 1,
  kAdversaryInit = 2,
  kBatches = 3,
  kNoise = 4,
  kEvalNoise = 5,
  kRawBatches = 6,
};

Matrix draw_noise(std::mt19937_64& rng, Index rows, Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix eps(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) eps(i, j) = normal(rng);
  }
  return eps;
}

void check_noise(const Batch& batch, const Matrix& eps) {
  if (eps.rows() != batch.size() || eps.cols() != batch.demand.cols()) {
    throw InvalidArgument("noise matrix must match the batch shape");
  }
}

// Labels swapped: CE against the wrong class is -log(1 - p_true).
Matrix flipped(const Matrix& one_hot) {
  Matrix out(one_hot.rows(), 2);
  out.col(0) = one_hot.col(1);
  out.col(1) = one_hot.col(0);
  return out;
}

FilterWeights weighted_penalty_grad(const FilterWeights& w, const TrainConfig& cfg,
                                    const Eigen::Vector2d& label_probs) {
  FilterWeights g = distortion_penalty_grad(w, label_probs, cfg.penalty_form);
  g.gamma *= cfg.kappa;
  g.V *= cfg.kappa_v_value();
  return g;
}

double weighted_penalty(const FilterWeights& w, const TrainConfig& cfg,
                        const Eigen::Vector2d& label_probs) {
  const FilterWeights v_only{Vector::Zero(w.horizon()), w.V};
  const double v_term = distortion_penalty(v_only, label_probs, cfg.penalty_form);
  return cfg.kappa * w.gamma.squaredNorm() + cfg.kappa_v_value() * v_term;
}

struct RecordGrad {
  FilterWeights grad;
  double loss = 0.0;
  bool solved = false;
  bool used = false;
  std::string reason;
};

}  // namespace

const char* to_string(ScheduleMode mode) {
  return mode == ScheduleMode::kStepDecay ? "step_decay" : "diminishing";
}

ScheduleMode schedule_mode_from_string(const std::string& name) {
  if (name == "step_decay") return ScheduleMode::kStepDecay;
  if (name == "diminishing") return ScheduleMode::kDiminishing;
  throw InvalidArgument("unknown schedule mode '" + name + "'");
}

void TrainConfig::validate() const {
  if (!(lambda_a >= 0.0)) throw InvalidArgument("lambda_a must be nonnegative");
  if (!(kappa >= 0.0) || !(kappa_v_value() >= 0.0)) {
    throw InvalidArgument("kappa must be nonnegative");
  }
  if (!(lr_adversary > 0.0) || !(lr_generator > 0.0)) {
    throw InvalidArgument("learning rates must be positive");
  }
  if (!(lr_decay >= 0.0 && lr_decay < 1.0)) throw InvalidArgument("lr_decay must lie in [0, 1)");
  if (decay_interval < 1) throw InvalidArgument("decay_interval must be at least 1");
  if (batch_size < 1) throw InvalidArgument("batch_size must be at least 1");
  if (max_steps < 0) throw InvalidArgument("max_steps must be nonnegative");
  if (!(convergence_tol >= 0.0)) throw InvalidArgument("convergence_tol must be nonnegative");
  if (convergence_window < 1) throw InvalidArgument("convergence_window must be at least 1");
  if (threads < 1) throw InvalidArgument("threads must be at least 1");
  if (eval_every < 0) throw InvalidArgument("eval_every must be nonnegative");
}

double TrainConfig::generator_lr(int step) const {
  if (step < 1) throw InvalidArgument("steps are numbered from 1");
  if (schedule == ScheduleMode::kDiminishing) return lr_generator / static_cast<double>(step);
  return lr_generator * std::pow(1.0 - lr_decay, step / decay_interval);
}

MlpParams adversary_update(const MlpParams& params, const FilterWeights& w, const Batch& batch,
                           const Matrix& eps, double lr, int threads, double* loss) {
  check_noise(batch, eps);
  const Matrix d_tilde = perturb_batch(w, batch.demand, eps, batch.one_hot);
  const BatchLossGrad lg = batch_loss_grad(params, d_tilde, batch.one_hot, threads);
  if (loss) *loss = lg.loss;
  return sgd_step(params, lg.params, lr);
}

double step1_objective(const FilterWeights& w, const MlpParams& params, const Batch& batch,
                       const Matrix& eps, const TrainConfig& cfg,
                       const Eigen::Vector2d& label_probs) {
  check_noise(batch, eps);
  const Matrix d_tilde = perturb_batch(w, batch.demand, eps, batch.one_hot);
  const Matrix targets = flipped(batch.one_hot);
  double sum = 0.0;
  for (Index i = 0; i < batch.size(); ++i) {
    sum += ce_loss(forward(params, d_tilde.row(i).transpose()), targets.row(i).transpose());
  }
  return cfg.lambda_a * sum / static_cast<double>(batch.size()) +
         weighted_penalty(w, cfg, label_probs);
}

FilterWeights step1_gradient(const FilterWeights& w, const MlpParams& params, const Batch& batch,
                             const Matrix& eps, const TrainConfig& cfg,
                             const Eigen::Vector2d& label_probs) {
  check_noise(batch, eps);
  FilterWeights g = weighted_penalty_grad(w, cfg, label_probs);
  if (cfg.lambda_a == 0.0) return g;
  const Matrix d_tilde = perturb_batch(w, batch.demand, eps, batch.one_hot);
  const BatchLossGrad lg =
      batch_loss_grad(params, d_tilde, flipped(batch.one_hot), cfg.threads);
  const double scale = cfg.lambda_a / static_cast<double>(batch.size());
  for (Index i = 0; i < batch.size(); ++i) {
    g.axpy(scale, grad_wrt_weights(w, eps.row(i).transpose(), batch.one_hot.row(i).transpose(),
                                   lg.inputs.row(i).transpose()));
  }
  return g;
}

FilterWeights step1_update(const FilterWeights& w, const MlpParams& params, const Batch& batch,
                           const Matrix& eps, const TrainConfig& cfg,
                           const Eigen::Vector2d& label_probs, double lr) {
  FilterWeights out = w;
  out.axpy(-lr, step1_gradient(w, params, batch, eps, cfg, label_probs));
  return out;
}

std::vector<ControlSample> step2_solve_controls(const FilterWeights& w, const Batch& batch,
                                                const Matrix& eps, const ControlProblem& prob) {
  check_noise(batch, eps);
  const Matrix d_tilde = perturb_batch(w, batch.demand, eps, batch.one_hot);
  std::vector<CanonicalQP> qps;
  qps.reserve(static_cast<std::size_t>(batch.size()));
  for (Index i = 0; i < batch.size(); ++i) {
    qps.push_back(build_qp_epigraph_form(prob.spec, prob.price, d_tilde.row(i).transpose()));
  }
  std::vector<QpSolution> sols = solve_batch(qps, prob.solver);
  std::vector<ControlSample> out;
  out.reserve(qps.size());
  for (std::size_t i = 0; i < qps.size(); ++i) {
    out.push_back({d_tilde.row(static_cast<Index>(i)).transpose(), std::move(qps[i]),
                   std::move(sols[i])});
  }
  return out;
}

UtilityGradient step3_gradient(const FilterWeights& w, const Batch& batch, const Matrix& eps,
                               const std::vector<ControlSample>& samples,
                               const ControlProblem& prob) {
  check_noise(batch, eps);
  if (samples.size() != static_cast<std::size_t>(batch.size())) {
    throw InvalidArgument("one control sample per batch record is required");
  }
  const Index H = batch.demand.cols();
  std::vector<RecordGrad> per(samples.size());
  const auto m = static_cast<std::int64_t>(samples.size());
#pragma omp parallel for num_threads(prob.solver.threads) schedule(dynamic, 1)
  for (std::int64_t ii = 0; ii < m; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const Index row = static_cast<Index>(ii);
    RecordGrad& out = per[i];
    const ControlSample& s = samples[i];
    if (!s.solution.optimal()) {
      out.reason = std::string("solver status ") + to_string(s.solution.status);
      continue;
    }
    const Vector demand = batch.demand.row(row).transpose();
    const ControlDecision x = ControlDecision::from_stacked(s.solution.x.head(3 * H), H);
    out.loss = utility_loss(x, demand, prob.price, prob.spec);
    out.solved = true;
    Vector cotangent = Vector::Zero(s.qp.num_vars());
    cotangent.head(3 * H) = utility_loss_grad_x(x, demand, prob.price, prob.spec);
    try {
      const Vector upstream = vjp_demand(s.qp, s.solution, cotangent, prob.solver);
      out.grad = grad_wrt_weights(w, eps.row(row).transpose(), batch.one_hot.row(row).transpose(),
                                  upstream);
      out.used = true;
    } catch (const Error& e) {
      out.reason = e.what();
    }
  }

  UtilityGradient res;
  res.grad = FilterWeights::zeros(H);
  std::size_t solved = 0;
  for (const RecordGrad& r : per) {
    if (r.solved) {
      res.utility_loss += r.loss;
      ++solved;
    }
    if (r.used) {
      res.grad.axpy(1.0, r.grad);
      ++res.used;
    } else {
      ++res.skipped;
      res.skip_reasons.push_back(r.reason);
    }
  }
  if (solved) res.utility_loss /= static_cast<double>(solved);
  if (res.used) {
    FilterWeights mean = FilterWeights::zeros(H);
    mean.axpy(1.0 / static_cast<double>(res.used), res.grad);
    res.grad = std::move(mean);
  }
  return res;
}

double utility_objective(const FilterWeights& w, const Batch& batch, const Matrix& eps,
                         const ControlProblem& prob) {
  const auto samples = step2_solve_controls(w, batch, eps, prob);
  const Index H = batch.demand.cols();
  double sum = 0.0;
  for (Index i = 0; i < batch.size(); ++i) {
    const auto& sol = samples[static_cast<std::size_t>(i)].solution;
    if (!sol.optimal()) throw Error("utility_objective: a control problem was not solved");
    sum += utility_loss(ControlDecision::from_stacked(sol.x.head(3 * H), H),
                        batch.demand.row(i).transpose(), prob.price, prob.spec);
  }
  return sum / static_cast<double>(batch.size());
}

TrainResult train(const Dataset& train_set, const Dataset* test, const ControlProblem& prob,
                  const TrainConfig& cfg, const std::optional<TrainInit>& init,
                  const StepCallback& on_step) {
  cfg.validate();
  if (train_set.empty()) throw InvalidArgument("training set is empty");
  if (cfg.eval_every > 0 && (!test || test->empty())) {
    throw InvalidArgument("eval_every needs a nonempty test set");
  }
  const Index H = train_set.horizon();
  TrainResult res;
  if (init) {
    res.filter = init->filter;
    res.adversary = init->adversary;
  } else {
    res.filter = init_filter(H, derive_seed(cfg.seed, kFilterInit));
    res.adversary = init_params(H, derive_seed(cfg.seed, kAdversaryInit));
  }
  if (res.filter.horizon() != H || res.adversary.horizon() != H) {
    throw InvalidArgument("initial weights do not match the data horizon");
  }

  const Eigen::Vector2d label_probs = train_set.label_probs();
  const std::size_t m = std::min(cfg.batch_size, train_set.size());
  BatchStream stream(train_set, m, derive_seed(cfg.seed, kBatches));
  std::mt19937_64 noise_rng(derive_seed(cfg.seed, kNoise));
  FilterWeights last_utility = FilterWeights::zeros(H);
  int calm = 0;

  for (int k = 1; k <= cfg.max_steps; ++k) {
    const Batch batch = stream.next();
    const Matrix eps = draw_noise(noise_rng, batch.size(), H);
    StepRecord rec;
    rec.step = k;
    rec.lr_generator = cfg.generator_lr(k);

    const MlpParams psi = adversary_update(res.adversary, res.filter, batch, eps,
                                           cfg.lr_adversary, cfg.threads, &rec.adversary_loss);
    const FilterWeights w_hat =
        step1_update(res.filter, psi, batch, eps, cfg, label_probs, rec.lr_generator);
    const auto samples = step2_solve_controls(w_hat, batch, eps, prob);
    const UtilityGradient ug = step3_gradient(w_hat, batch, eps, samples, prob);
    // A batch with no differentiable record reuses the previous gradient.
    if (ug.used > 0) last_utility = ug.grad;
    FilterWeights w_next = w_hat;
    w_next.axpy(-rec.lr_generator, last_utility);

    rec.utility_loss = ug.utility_loss;
    rec.skipped = ug.skipped;
    rec.distortion = distortion_penalty(w_next, label_probs, cfg.penalty_form);
    FilterWeights dw = w_next;
    dw.axpy(-1.0, res.filter);
    MlpParams dpsi = psi;
    dpsi.axpy(-1.0, res.adversary);
    rec.param_delta = std::sqrt(dw.squared_norm() + dpsi.squared_norm());

    res.filter = std::move(w_next);
    res.adversary = psi;
    if (cfg.eval_every > 0 && k % cfg.eval_every == 0) {
      const EvalMetrics em = evaluate(res.filter, res.adversary, *test, prob,
                                      derive_seed(cfg.seed, kEvalNoise));
      rec.test_accuracy = em.priv_accuracy;
      rec.utility_gap_pct = em.utility_gap_pct;
    }
    res.log.steps.push_back(rec);
    if (on_step) on_step(rec, res.filter, res.adversary);

    calm = rec.param_delta < cfg.convergence_tol ? calm + 1 : 0;
    if (calm >= cfg.convergence_window) {
      res.log.converged = true;
      break;
    }
  }
  return res;
}

MlpParams train_raw_adversary(const Dataset& train_set, const TrainConfig& cfg, int steps) {
  cfg.validate();
  if (train_set.empty()) throw InvalidArgument("training set is empty");
  MlpParams psi = init_params(train_set.horizon(), derive_seed(cfg.seed, kAdversaryInit));
  BatchStream stream(train_set, std::min(cfg.batch_size, train_set.size()),
                     derive_seed(cfg.seed, kRawBatches));
  for (int k = 0; k < steps; ++k) {
    const Batch batch = stream.next();
    const BatchLossGrad lg = batch_loss_grad(psi, batch.demand, batch.one_hot, cfg.threads);
    psi.axpy(-cfg.lr_adversary, lg.params);
  }
  return psi;
}

Dataset privatize(const FilterWeights& w, const Dataset& ds, std::uint64_t eps_seed) {
  std::mt19937_64 rng(eps_seed);
  const auto n = static_cast<Index>(ds.size());
  const Matrix eps = draw_noise(rng, n, ds.horizon());
  std::vector<DemandRecord> out;
  out.reserve(ds.size());
  for (Index i = 0; i < n; ++i) {
    const auto& r = ds.records()[static_cast<std::size_t>(i)];
    out.push_back({perturb(w, r.demand, eps.row(i).transpose(), r.one_hot()), r.label});
  }
  return Dataset(std::move(out), ds.horizon(), ds.split_seed());
}

double retrained_accuracy(const FilterWeights& w, const Dataset& train_set, const Dataset& test,
                          const TrainConfig& cfg, int steps, std::uint64_t eps_seed) {
  const Dataset priv_train = privatize(w, train_set, derive_seed(eps_seed, kNoise));
  const MlpParams psi = train_raw_adversary(priv_train, cfg, steps);
  return accuracy(psi, privatize(w, test, eps_seed));
}

EvalMetrics evaluate(const FilterWeights& w, const MlpParams& params, const Dataset& test,
                     const ControlProblem& prob, std::uint64_t eps_seed, bool keep_records) {
  if (test.empty()) throw InvalidArgument("evaluation set is empty");
  const Index H = test.horizon();
  const auto n = static_cast<Index>(test.size());
  std::mt19937_64 rng(eps_seed);
  const Matrix eps = draw_noise(rng, n, H);
  const Matrix demand = test.demand_matrix();
  Matrix one_hot(n, 2);
  std::vector<int> labels;
  labels.reserve(test.size());
  for (Index i = 0; i < n; ++i) {
    const auto& r = test.records()[static_cast<std::size_t>(i)];
    one_hot.row(i) = r.one_hot().transpose();
    labels.push_back(r.label);
  }
  const Matrix d_tilde = perturb_batch(w, demand, eps, one_hot);

  EvalMetrics out;
  out.priv_accuracy = accuracy(params, d_tilde, labels);
  out.distortion = (d_tilde - demand).rowwise().squaredNorm().mean();

  // Raw and privatized problems solved in one batch: rows [0, n) raw.
  std::vector<CanonicalQP> qps;
  qps.reserve(2 * test.size());
  for (Index i = 0; i < n; ++i) {
    qps.push_back(build_qp_epigraph_form(prob.spec, prob.price, demand.row(i).transpose()));
  }
  for (Index i = 0; i < n; ++i) {
    qps.push_back(build_qp_epigraph_form(prob.spec, prob.price, d_tilde.row(i).transpose()));
  }
  const auto sols = solve_batch(qps, prob.solver);

  double gap_sum = 0.0;
  out.records.resize(test.size());
  for (Index i = 0; i < n; ++i) {
    const auto& raw = sols[static_cast<std::size_t>(i)];
    const auto& priv = sols[static_cast<std::size_t>(n + i)];
    RecordEval& rec = out.records[static_cast<std::size_t>(i)];
    rec.solved = raw.optimal() && priv.optimal();
    if (!rec.solved) continue;
    const Vector d = demand.row(i).transpose();
    rec.x_raw = raw.x.head(3 * H);
    rec.x_priv = priv.x.head(3 * H);
    rec.raw_cost =
        utility_loss(ControlDecision::from_stacked(rec.x_raw, H), d, prob.price, prob.spec);
    rec.priv_cost =
        utility_loss(ControlDecision::from_stacked(rec.x_priv, H), d, prob.price, prob.spec);
    // A zero-cost baseline has no defined relative gap.
    if (rec.raw_cost > 1e-9) {
      gap_sum += (rec.priv_cost - rec.raw_cost) / rec.raw_cost * 100.0;
      ++out.gap_records;
    }
  }
  out.utility_gap_pct = out.gap_records ? gap_sum / static_cast<double>(out.gap_records) : 0.0;
  if (!keep_records) out.records.clear();
  return out;
}

double Surrogate::utility_loss(const Vector& g) const {
  return 0.5 * c.dot((g - u).cwiseAbs2());
}

Vector Surrogate::optimum() const {
  Vector g = u;
  for (Index i = 0; i < g.size(); ++i) {
    if (c(i) > 0.0) {
      g(i) = u(i) - a(i) / c(i);
    } else if (a(i) != 0.0) {
      throw InvalidArgument("surrogate is unbounded below");
    }
  }
  return g;
}

Surrogate make_surrogate(Index dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> curv(4.0, 9.0);
  Surrogate s{Vector(dim), Vector(dim), Vector(dim), Vector(dim)};
  for (Index i = 0; i < dim; ++i) {
    s.a(i) = normal(rng);
    s.c(i) = curv(rng);
    s.u(i) = normal(rng);
    s.start(i) = normal(rng);
  }
  return s;
}

ProbeTrace convergence_probe(const Surrogate& s, int steps, double eta0) {
  if (steps < 1) throw InvalidArgument("probe needs at least one step");
  if (!(eta0 > 0.0)) throw InvalidArgument("eta0 must be positive");
  const Vector g_star = s.optimum();
  const double f_star = s.loss(g_star);
  const double r = (s.start - g_star).norm();

  ProbeTrace trace;
  trace.initial_gap = s.loss(s.start) - f_star;
  std::vector<double> sum_eta, sum_eta2;
  double delta = 0.0, best = std::numeric_limits<double>::infinity();
  double s1 = 0.0, s2 = 0.0;
  Vector g = s.start;
  for (int k = 1; k <= steps; ++k) {
    const double eta = eta0 / static_cast<double>(k);
    const Vector g_hat = g - eta * s.a;
    const Vector grad_u = s.c.cwiseProduct(g_hat - s.u);
    best = std::min(best, s.loss(g_hat) - f_star);
    // The step direction is the full gradient at g_hat; the offset eta * a
    // between g and g_hat costs one extra |a| in the per-step bound.
    delta = std::max(delta, (s.a + grad_u).norm() + s.a.norm());
    g = g_hat - eta * grad_u;
    s1 += eta;
    s2 += eta * eta;
    sum_eta.push_back(s1);
    sum_eta2.push_back(s2);
    trace.min_gap.push_back(best);
  }
  for (std::size_t k = 0; k < sum_eta.size(); ++k) {
    trace.bound.push_back((r * r + delta * delta * sum_eta2[k]) / (2.0 * sum_eta[k]));
  }
  return trace;
}

}  // namespace privctrl
