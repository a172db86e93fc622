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


// Subcommands of the privctrl tool. Each one reads a RunConfig, writes its
// artifacts under cfg.out_dir and returns what it wrote.

#ifndef PRIVCTRL_APP_HPP_
#define PRIVCTRL_APP_HPP_

#include <filesystem>
#include <vector>

#include "privctrl/config.hpp"
#include "privctrl/io.hpp"
#include "privctrl/trainer.hpp"

namespace privctrl {

struct DataSplit {
  Dataset train;
  Dataset test;
};

/// Loads cfg.data_path, or synthesizes when it is empty, then splits.
DataSplit prepare_data(const RunConfig& cfg);
ControlProblem make_problem(const RunConfig& cfg);

/// Test accuracy of an adversary trained on raw demand.
double raw_accuracy(const RunConfig& cfg, const DataSplit& data);

struct TrainOutcome {
  TrainResult result;
  EvalMetrics eval;
  RunMetrics metrics;
};

/// Train at cfg.train.lambda_a and evaluate on the test split. `raw_acc` is
/// copied into the metrics.
TrainOutcome train_and_evaluate(const RunConfig& cfg, const DataSplit& data, double raw_acc,
                                const StepCallback& on_step = {});

/// data.csv
std::filesystem::path cmd_synth(const RunConfig& cfg);

/// filter.ckpt, adversary.ckpt, train_log.csv, metrics.json, config.ini
RunMetrics cmd_train(const RunConfig& cfg);

/// sweep.csv; a failing point is recorded and the sweep moves on.
std::vector<SweepRow> cmd_sweep(const RunConfig& cfg);

/// bench.csv
std::vector<BenchRow> cmd_bench(const RunConfig& cfg);

/// eval_metrics.json, eval_records.csv, from the checkpoints in `ckpt_dir`.
RunMetrics cmd_eval(const RunConfig& cfg, const std::filesystem::path& ckpt_dir);

}  // namespace privctrl

#endif  // PRIVCTRL_APP_HPP_
