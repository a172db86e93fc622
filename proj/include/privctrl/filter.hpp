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

// Linear privatization filter d~ = d + diag(gamma) eps + V y and its
// distortion regularizer.

#ifndef PRIVCTRL_FILTER_HPP_
#define PRIVCTRL_FILTER_HPP_

#include <cstdint>
#include <string>

#include "privctrl/common.hpp"

namespace privctrl {

struct FilterWeights {
  Vector gamma;  // diagonal of Gamma, length H
  Matrix V;      // H x 2, column k is added for label k

  Index horizon() const { return gamma.size(); }

  static FilterWeights zeros(Index horizon);

  /// this += alpha * other
  FilterWeights& axpy(double alpha, const FilterWeights& other);
  double squared_norm() const;
};

/// Entries uniform on (-1/(H+2), 1/(H+2)).
FilterWeights init_filter(Index horizon, std::uint64_t seed);

Vector perturb(const FilterWeights& w, const Vector& demand, const Vector& eps,
               const Vector& one_hot);

/// Row-wise perturb of m x H demand and noise with m x 2 one-hots.
Matrix perturb_batch(const FilterWeights& w, const Matrix& demand, const Matrix& eps,
                     const Matrix& one_hot);

/// kExpected is E|d~ - d|^2 for eps ~ N(0, I) and a one-hot label drawn from
/// `label_probs`: sum gamma^2 + sum_k pi_k |V_k|^2. kLabelMean penalizes the
/// mean label offset instead: sum gamma^2 + |V pi|^2.
enum class PenaltyForm { kExpected, kLabelMean };

const char* to_string(PenaltyForm form);
PenaltyForm penalty_form_from_string(const std::string& name);

/// `label_probs` is E[one_hot] = [P(label 0), P(label 1)].
double distortion_penalty(const FilterWeights& w, const Eigen::Vector2d& label_probs,
                          PenaltyForm form = PenaltyForm::kExpected);

/// Gradient of distortion_penalty with respect to (gamma, V).
FilterWeights distortion_penalty_grad(const FilterWeights& w, const Eigen::Vector2d& label_probs,
                                      PenaltyForm form = PenaltyForm::kExpected);

/// Pulls `upstream` = dLoss/dd~ back to the weights:
/// dgamma_j = upstream_j eps_j, dV_jk = upstream_j y_k.
FilterWeights grad_wrt_weights(const FilterWeights& w, const Vector& eps, const Vector& one_hot,
                               const Vector& upstream);

}  // namespace privctrl

#endif  // PRIVCTRL_FILTER_HPP_
