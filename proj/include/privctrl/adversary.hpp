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

// The adversary f_psi: H -> H (ELU) -> ceil(H/2) (ELU) -> 2 (softmax),
// trained on two-class cross-entropy with hand-written reverse mode.

#ifndef PRIVCTRL_ADVERSARY_HPP_
#define PRIVCTRL_ADVERSARY_HPP_

#include <cstdint>
#include <span>

#include "privctrl/common.hpp"
#include "privctrl/data.hpp"

namespace privctrl {

struct MlpParams {
  Matrix W1;  // H x H
  Vector b1;
  Matrix W2;  // ceil(H/2) x H
  Vector b2;
  Matrix W3;  // 2 x ceil(H/2)
  Vector b3;

  Index horizon() const { return W1.cols(); }

  static MlpParams zeros(Index horizon);

  /// this += alpha * other
  MlpParams& axpy(double alpha, const MlpParams& other);
  double squared_norm() const;
  bool same_shape(const MlpParams& other) const;
};

/// Cache for backward().
struct ForwardTrace {
  Vector input;
  Vector z1, a1;
  Vector z2, a2;
  Vector logits;
  Vector probs;
};

/// Weights uniform on (-1/fan_in, 1/fan_in), biases zero.
MlpParams init_params(Index horizon, std::uint64_t seed);

/// Class probabilities; fills `trace` when given.
Vector forward(const MlpParams& params, const Vector& input, ForwardTrace* trace = nullptr);

/// -log(max(probs . y, 1e-12)) for a one-hot y.
double ce_loss(const Vector& probs, const Vector& one_hot);

struct MlpGradient {
  MlpParams params;
  Vector input;
};

/// Exact gradient of ce_loss(forward(input), y). The clamp is honoured: a
/// sample whose true-class probability is below 1e-12 contributes zero.
MlpGradient backward(const MlpParams& params, const ForwardTrace& trace, const Vector& one_hot);

MlpParams sgd_step(const MlpParams& params, const MlpParams& grads, double lr);

/// Argmax label, ties to class 0.
int predict(const MlpParams& params, const Vector& input);

double accuracy(const MlpParams& params, const Matrix& inputs, std::span<const int> labels);
double accuracy(const MlpParams& params, const Dataset& ds);

struct BatchLossGrad {
  double loss = 0.0;     // batch mean
  MlpParams params;      // batch-mean parameter gradient
  Matrix inputs;         // per-row input gradients (not averaged), m x H
};

/// Cross-entropy of every row of `inputs` against the matching row of
/// `targets` (m x 2). Per-sample work runs on `threads` OpenMP workers; the
/// mean is reduced in row order so the result does not depend on `threads`.
BatchLossGrad batch_loss_grad(const MlpParams& params, const Matrix& inputs,
                              const Matrix& targets, int threads = 1);

/// Single-threaded reference for batch_loss_grad.
BatchLossGrad batch_loss_grad_serial(const MlpParams& params, const Matrix& inputs,
                                     const Matrix& targets);

}  // namespace privctrl

#endif  // PRIVCTRL_ADVERSARY_HPP_
