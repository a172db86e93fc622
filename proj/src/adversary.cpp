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

#include "privctrl/adversary.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <random>

namespace privctrl {

namespace {

constexpr double kLogFloor = 1e-12;

Index hidden2(Index horizon) { return (horizon + 1) / 2; }

Vector elu(const Vector& z) {
  return z.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
}

Vector elu_prime(const Vector& z) {
  return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : std::exp(v); });
}

void fill_uniform(Matrix& M, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  // Column-major fill order is part of the seeded contract.
  for (Index j = 0; j < M.cols(); ++j) {
    for (Index i = 0; i < M.rows(); ++i) M(i, j) = dist(rng);
  }
}

struct Sample {
  double loss;
  MlpGradient grad;
};

Sample sample_loss_grad(const MlpParams& params, const Vector& input, const Vector& target) {
  ForwardTrace trace;
  forward(params, input, &trace);
  return {ce_loss(trace.probs, target), backward(params, trace, target)};
}

BatchLossGrad reduce(const MlpParams& params, std::vector<Sample>& samples) {
  BatchLossGrad out;
  const Index m = static_cast<Index>(samples.size());
  out.params = MlpParams::zeros(params.horizon());
  out.inputs.resize(m, params.horizon());
  for (Index i = 0; i < m; ++i) {
    auto& s = samples[static_cast<std::size_t>(i)];
    out.loss += s.loss;
    out.params.axpy(1.0, s.grad.params);
    out.inputs.row(i) = s.grad.input.transpose();
  }
  out.loss /= static_cast<double>(m);
  MlpParams mean = MlpParams::zeros(params.horizon());
  mean.axpy(1.0 / static_cast<double>(m), out.params);
  out.params = std::move(mean);
  return out;
}

void check_batch(const MlpParams& params, const Matrix& inputs, const Matrix& targets) {
  if (inputs.rows() == 0) throw InvalidArgument("empty batch");
  if (inputs.cols() != params.horizon()) throw InvalidArgument("input width differs from horizon");
  if (targets.rows() != inputs.rows() || targets.cols() != 2) {
    throw InvalidArgument("targets must be m x 2");
  }
}

}  // namespace

MlpParams MlpParams::zeros(Index horizon) {
  const Index h2 = hidden2(horizon);
  return {Matrix::Zero(horizon, horizon), Vector::Zero(horizon), Matrix::Zero(h2, horizon),
          Vector::Zero(h2),               Matrix::Zero(2, h2),   Vector::Zero(2)};
}

MlpParams& MlpParams::axpy(double alpha, const MlpParams& other) {
  if (!same_shape(other)) throw InvalidArgument("parameter shapes differ");
  W1 += alpha * other.W1;
  b1 += alpha * other.b1;
  W2 += alpha * other.W2;
  b2 += alpha * other.b2;
  W3 += alpha * other.W3;
  b3 += alpha * other.b3;
  return *this;
}

double MlpParams::squared_norm() const {
  return W1.squaredNorm() + b1.squaredNorm() + W2.squaredNorm() + b2.squaredNorm() +
         W3.squaredNorm() + b3.squaredNorm();
}

bool MlpParams::same_shape(const MlpParams& o) const {
  return W1.rows() == o.W1.rows() && W1.cols() == o.W1.cols() && b1.size() == o.b1.size() &&
         W2.rows() == o.W2.rows() && W2.cols() == o.W2.cols() && b2.size() == o.b2.size() &&
         W3.rows() == o.W3.rows() && W3.cols() == o.W3.cols() && b3.size() == o.b3.size();
}

MlpParams init_params(Index horizon, std::uint64_t seed) {
  if (horizon < 2) throw InvalidArgument("adversary needs horizon >= 2");
  std::mt19937_64 rng(seed);
  MlpParams p = MlpParams::zeros(horizon);
  fill_uniform(p.W1, 1.0 / static_cast<double>(p.W1.cols()), rng);
  fill_uniform(p.W2, 1.0 / static_cast<double>(p.W2.cols()), rng);
  fill_uniform(p.W3, 1.0 / static_cast<double>(p.W3.cols()), rng);
  return p;
}

Vector forward(const MlpParams& params, const Vector& input, ForwardTrace* trace) {
  if (input.size() != params.horizon()) throw InvalidArgument("input width differs from horizon");
  const Vector z1 = params.W1 * input + params.b1;
  const Vector a1 = elu(z1);
  const Vector z2 = params.W2 * a1 + params.b2;
  const Vector a2 = elu(z2);
  const Vector logits = params.W3 * a2 + params.b3;
  // Shifted softmax.
  const Vector e = (logits.array() - logits.maxCoeff()).exp().matrix();
  Vector probs = e / e.sum();
  if (trace) *trace = {input, z1, a1, z2, a2, logits, probs};
  return probs;
}

double ce_loss(const Vector& probs, const Vector& one_hot) {
  return -std::log(std::max(probs.dot(one_hot), kLogFloor));
}

MlpGradient backward(const MlpParams& params, const ForwardTrace& trace, const Vector& one_hot) {
  MlpGradient g;
  g.params = MlpParams::zeros(params.horizon());
  if (trace.probs.dot(one_hot) < kLogFloor) {
    g.input = Vector::Zero(params.horizon());
    return g;
  }
  const Vector d_logits = trace.probs - one_hot;
  g.params.W3 = d_logits * trace.a2.transpose();
  g.params.b3 = d_logits;
  const Vector d_z2 = (params.W3.transpose() * d_logits).cwiseProduct(elu_prime(trace.z2));
  g.params.W2 = d_z2 * trace.a1.transpose();
  g.params.b2 = d_z2;
  const Vector d_z1 = (params.W2.transpose() * d_z2).cwiseProduct(elu_prime(trace.z1));
  g.params.W1 = d_z1 * trace.input.transpose();
  g.params.b1 = d_z1;
  g.input = params.W1.transpose() * d_z1;
  return g;
}

MlpParams sgd_step(const MlpParams& params, const MlpParams& grads, double lr) {
  MlpParams out = params;
  out.axpy(-lr, grads);
  return out;
}

int predict(const MlpParams& params, const Vector& input) {
  const Vector probs = forward(params, input);
  return probs(1) > probs(0) ? 1 : 0;
}

double accuracy(const MlpParams& params, const Matrix& inputs, std::span<const int> labels) {
  if (inputs.rows() == 0) throw InvalidArgument("accuracy needs at least one record");
  if (static_cast<std::size_t>(inputs.rows()) != labels.size()) {
    throw InvalidArgument("inputs and labels differ in length");
  }
  std::size_t hits = 0;
  for (Index i = 0; i < inputs.rows(); ++i) {
    hits += predict(params, inputs.row(i).transpose()) == labels[static_cast<std::size_t>(i)];
  }
  return static_cast<double>(hits) / static_cast<double>(inputs.rows());
}

double accuracy(const MlpParams& params, const Dataset& ds) {
  std::vector<int> labels;
  labels.reserve(ds.size());
  for (const auto& r : ds.records()) labels.push_back(r.label);
  return accuracy(params, ds.demand_matrix(), labels);
}

BatchLossGrad batch_loss_grad(const MlpParams& params, const Matrix& inputs,
                              const Matrix& targets, int threads) {
  check_batch(params, inputs, targets);
  if (threads < 1) throw InvalidArgument("threads must be at least 1");
  std::vector<Sample> samples(static_cast<std::size_t>(inputs.rows()));
  const auto m = static_cast<std::int64_t>(inputs.rows());
#pragma omp parallel for num_threads(threads) schedule(static)
  for (std::int64_t i = 0; i < m; ++i) {
    samples[static_cast<std::size_t>(i)] =
        sample_loss_grad(params, inputs.row(i).transpose(), targets.row(i).transpose());
  }
  return reduce(params, samples);
}

BatchLossGrad batch_loss_grad_serial(const MlpParams& params, const Matrix& inputs,
                                     const Matrix& targets) {
  check_batch(params, inputs, targets);
  std::vector<Sample> samples;
  samples.reserve(static_cast<std::size_t>(inputs.rows()));
  for (Index i = 0; i < inputs.rows(); ++i) {
    samples.push_back(
        sample_loss_grad(params, inputs.row(i).transpose(), targets.row(i).transpose()));
  }
  return reduce(params, samples);
}

}  // namespace privctrl
