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

#include <omp.h>

#include <string>

#include "privctrl/qp_engine.hpp"

namespace privctrl {

namespace {

void validate_batch(std::span<const CanonicalQP> qps, const SolverConfig& cfg) {
  if (qps.empty()) throw InvalidArgument("solve_batch needs at least one problem");
  cfg.validate();
  for (std::size_t i = 0; i < qps.size(); ++i) {
    try {
      validate_qp(qps[i]);
    } catch (const Error& e) {
      throw InvalidArgument("problem " + std::to_string(i) + ": " + e.what());
    }
  }
}

}  // namespace

std::vector<QpSolution> solve_batch(std::span<const CanonicalQP> qps,
                                    const SolverConfig& cfg) {
  validate_batch(qps, cfg);
  std::vector<QpSolution> out(qps.size());
  const auto count = static_cast<std::int64_t>(qps.size());
#pragma omp parallel for num_threads(cfg.threads) schedule(dynamic, 1)
  for (std::int64_t i = 0; i < count; ++i) {
    out[static_cast<std::size_t>(i)] = solve(qps[static_cast<std::size_t>(i)], cfg);
  }
  return out;
}

std::vector<QpSolution> solve_batch_serial(std::span<const CanonicalQP> qps,
                                           const SolverConfig& cfg) {
  validate_batch(qps, cfg);
  std::vector<QpSolution> out;
  out.reserve(qps.size());
  for (const auto& qp : qps) out.push_back(solve(qp, cfg));
  return out;
}

}  // namespace privctrl
