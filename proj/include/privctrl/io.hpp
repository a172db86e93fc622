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


// Artifact files. Checkpoints are decimal text: one JSON header line naming
// each tensor and its shape, then every tensor row-major, one row per line.

#ifndef PRIVCTRL_IO_HPP_
#define PRIVCTRL_IO_HPP_

#include <filesystem>
#include <vector>

#include "privctrl/adversary.hpp"
#include "privctrl/filter.hpp"
#include "privctrl/trainer.hpp"

namespace privctrl {

void save_filter(const FilterWeights& w, const std::filesystem::path& path);
/// Throws ParseError on a malformed file or when horizon >= 0 and the stored
/// horizon differs.
FilterWeights load_filter(const std::filesystem::path& path, Index horizon = -1);

void save_adversary(const MlpParams& p, const std::filesystem::path& path);
MlpParams load_adversary(const std::filesystem::path& path, Index horizon = -1);

struct RunMetrics {
  double raw_accuracy = 0.0;
  double priv_accuracy = 0.0;
  double utility_gap_pct = 0.0;
  double distortion = 0.0;
  double lambda_a = 0.0;

  bool operator==(const RunMetrics&) const = default;
};

void write_metrics_json(const RunMetrics& m, const std::filesystem::path& path);
RunMetrics read_metrics_json(const std::filesystem::path& path);

/// One row per step.
void write_train_log_csv(const TrainLog& log, const std::filesystem::path& path);

/// Per test record: label, raw and private cost, their difference, and the
/// charge, discharge and state-of-charge schedules under both demands.
void write_eval_csv(const Dataset& test, const EvalMetrics& m, const std::filesystem::path& path);

struct SweepRow {
  double lambda_a = 0.0;
  double accuracy = 0.0;
  double utility_gap_pct = 0.0;
  double distortion = 0.0;
  std::string error;  // empty when the point succeeded
};

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);

}  // namespace privctrl

#endif  // PRIVCTRL_IO_HPP_
