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

#include "privctrl/filter.hpp"

#include <cmath>
#include <random>

namespace privctrl {

namespace {

void check_label_probs(const Eigen::Vector2d& pi) {
  if ((pi.array() < 0.0).any() || std::abs(pi.sum() - 1.0) > 1e-12) {
    throw InvalidArgument("label probabilities must be nonnegative and sum to 1");
  }
}

}  // namespace

FilterWeights FilterWeights::zeros(Index horizon) {
  return {Vector::Zero(horizon), Matrix::Zero(horizon, 2)};
}

FilterWeights& FilterWeights::axpy(double alpha, const FilterWeights& other) {
  if (other.gamma.size() != gamma.size() || other.V.rows() != V.rows()) {
    throw InvalidArgument("filter shapes differ");
  }
  gamma += alpha * other.gamma;
  V += alpha * other.V;
  return *this;
}

double FilterWeights::squared_norm() const { return gamma.squaredNorm() + V.squaredNorm(); }

FilterWeights init_filter(Index horizon, std::uint64_t seed) {
  if (horizon < 1) throw InvalidArgument("filter needs horizon >= 1");
  const double bound = 1.0 / static_cast<double>(horizon + 2);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-bound, bound);
  FilterWeights w = FilterWeights::zeros(horizon);
  for (Index j = 0; j < horizon; ++j) w.gamma(j) = dist(rng);
  for (Index k = 0; k < 2; ++k) {
    for (Index j = 0; j < horizon; ++j) w.V(j, k) = dist(rng);
  }
  return w;
}

Vector perturb(const FilterWeights& w, const Vector& demand, const Vector& eps,
               const Vector& one_hot) {
  const Index H = w.horizon();
  if (demand.size() != H || eps.size() != H || one_hot.size() != 2) {
    throw InvalidArgument("perturb: dimension mismatch");
  }
  return demand + w.gamma.cwiseProduct(eps) + w.V * one_hot;
}

Matrix perturb_batch(const FilterWeights& w, const Matrix& demand, const Matrix& eps,
                     const Matrix& one_hot) {
  if (demand.cols() != w.horizon() || eps.rows() != demand.rows() ||
      eps.cols() != demand.cols() || one_hot.rows() != demand.rows() || one_hot.cols() != 2) {
    throw InvalidArgument("perturb_batch: dimension mismatch");
  }
  return demand + eps * w.gamma.asDiagonal() + one_hot * w.V.transpose();
}

const char* to_string(PenaltyForm form) {
  return form == PenaltyForm::kExpected ? "expected" : "label_mean";
}

PenaltyForm penalty_form_from_string(const std::string& name) {
  if (name == "expected") return PenaltyForm::kExpected;
  if (name == "label_mean") return PenaltyForm::kLabelMean;
  throw InvalidArgument("unknown penalty form '" + name + "'");
}

double distortion_penalty(const FilterWeights& w, const Eigen::Vector2d& pi, PenaltyForm form) {
  check_label_probs(pi);
  const double g = w.gamma.squaredNorm();
  if (form == PenaltyForm::kLabelMean) return g + (w.V * pi).squaredNorm();
  return g + pi(0) * w.V.col(0).squaredNorm() + pi(1) * w.V.col(1).squaredNorm();
}

FilterWeights distortion_penalty_grad(const FilterWeights& w, const Eigen::Vector2d& pi,
                                      PenaltyForm form) {
  check_label_probs(pi);
  FilterWeights g{2.0 * w.gamma, Matrix(w.V.rows(), 2)};
  if (form == PenaltyForm::kLabelMean) {
    g.V = 2.0 * (w.V * pi) * pi.transpose();
  } else {
    g.V = 2.0 * w.V * pi.asDiagonal();
  }
  return g;
}

FilterWeights grad_wrt_weights(const FilterWeights& w, const Vector& eps, const Vector& one_hot,
                               const Vector& upstream) {
  const Index H = w.horizon();
  if (eps.size() != H || upstream.size() != H || one_hot.size() != 2) {
    throw InvalidArgument("grad_wrt_weights: dimension mismatch");
  }
  return {upstream.cwiseProduct(eps), upstream * one_hot.transpose()};
}

}  // namespace privctrl
