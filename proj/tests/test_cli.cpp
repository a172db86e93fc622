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

#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "privctrl/app.hpp"
#include "privctrl/config.hpp"
#include "privctrl/io.hpp"

namespace privctrl {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("privctrl_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

RunConfig small_run(const std::string& name) {
  RunConfig cfg;
  cfg.out_dir = scratch(name).string();
  cfg.synth.n_records = 200;
  cfg.train.max_steps = 20;
  cfg.train.batch_size = 16;
  cfg.train.lr_adversary = 0.01;
  return cfg;
}

// ---- config ------------------------------------------------------------------

TEST(Config, DefaultRoundTrips) {
  const RunConfig cfg;
  EXPECT_EQ(parse_config(emit_config(cfg)), cfg);
}

TEST(Config, EditedValuesRoundTrip) {
  RunConfig cfg;
  cfg.seed = 99;
  cfg.threads = 3;
  cfg.data_path = "data/x.csv";
  cfg.synth.solar_depth = 0.0;
  cfg.synth.peak_hours = {1, 5};
  cfg.battery.eta_in = 0.91;
  cfg.tiers = {{0, 12, 0.1}, {12, 24, 0.35}};
  cfg.train.lambda_a = 0.1 + 0.2;  // not exactly representable in short decimal
  cfg.train.kappa_v = 5e-4;
  cfg.train.schedule = ScheduleMode::kDiminishing;
  cfg.train.penalty_form = PenaltyForm::kLabelMean;
  cfg.solver.polish = false;
  cfg.sweep_lambdas = {1, 2};
  cfg.bench.thread_counts = {1, 0};
  const RunConfig back = parse_config(emit_config(cfg));
  EXPECT_EQ(back, cfg);
  EXPECT_EQ(emit_config(back), emit_config(cfg));
}

TEST(Config, PartialTextKeepsDefaults) {
  const RunConfig cfg = parse_config("[train]\nlambda_a = 4\n; comment\n");
  RunConfig expect;
  expect.train.lambda_a = 4.0;
  EXPECT_EQ(cfg, expect);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_config("[train]\nlamda_a = 4\n"), ParseError);
  EXPECT_THROW(parse_config("[nope]\nx = 1\n"), ParseError);
  EXPECT_THROW(parse_config("[train]\nlambda_a = lots\n"), ParseError);
  EXPECT_THROW(parse_config("[price]\ntiers = 0:4\n"), ParseError);
  // Parsing is syntactic; ranges are checked by validate().
  const RunConfig negative = parse_config("[train]\nlambda_a = -1\n");
  EXPECT_THROW(negative.validate(), InvalidArgument);
}

TEST(Config, ShippedAcceptanceConfigLoads) {
  const RunConfig cfg = load_config(fs::path(PRIVCTRL_SOURCE_DIR) / "configs/acceptance.ini");
  EXPECT_EQ(cfg.train.lambda_a, 128.0);
  EXPECT_EQ(cfg.sweep_lambdas, (std::vector<double>{8, 32, 128}));
  EXPECT_EQ(cfg.synth.n_records, 4000u);
  EXPECT_EQ(cfg.synth.horizon, 24);
}

TEST(Config, DerivedSettingsFollowTheRunSeed) {
  RunConfig a, b;
  b.seed = 2;
  EXPECT_NE(a.split_seed(), b.split_seed());
  EXPECT_NE(a.eval_seed(), a.split_seed());
  EXPECT_EQ(a.train_config().seed, a.seed);
  a.raw_adversary_steps = -1;
  EXPECT_EQ(a.raw_steps(), a.train.max_steps);
}

// ---- checkpoints and metrics ----------------------------------------------------

TEST(Checkpoint, FilterRoundTripsBitwise) {
  const fs::path dir = scratch("ckpt_filter");
  FilterWeights w = init_filter(24, 3);
  w.gamma(0) = 0.1 + 0.2;
  save_filter(w, dir / "f.ckpt");
  const FilterWeights back = load_filter(dir / "f.ckpt", 24);
  EXPECT_EQ(back.gamma, w.gamma);
  EXPECT_EQ(back.V, w.V);
}

TEST(Checkpoint, AdversaryRoundTripsBitwise) {
  const fs::path dir = scratch("ckpt_adv");
  const MlpParams p = init_params(24, 4);
  save_adversary(p, dir / "a.ckpt");
  const MlpParams back = load_adversary(dir / "a.ckpt");
  EXPECT_EQ(back.W1, p.W1);
  EXPECT_EQ(back.W2, p.W2);
  EXPECT_EQ(back.W3, p.W3);
  EXPECT_EQ(back.b3, p.b3);
}

TEST(Checkpoint, RejectsMismatches) {
  const fs::path dir = scratch("ckpt_bad");
  save_filter(init_filter(24, 1), dir / "f.ckpt");
  save_adversary(init_params(24, 1), dir / "a.ckpt");
  EXPECT_THROW(load_filter(dir / "f.ckpt", 48), ParseError);
  EXPECT_THROW(load_adversary(dir / "f.ckpt"), ParseError);
  EXPECT_THROW(load_filter(dir / "a.ckpt"), ParseError);
  EXPECT_THROW(load_filter(dir / "missing.ckpt"), Error);

  const std::string text = slurp(dir / "f.ckpt");
  std::ofstream(dir / "cut.ckpt") << text.substr(0, text.size() / 2);
  EXPECT_THROW(load_filter(dir / "cut.ckpt"), ParseError);
  std::ofstream(dir / "extra.ckpt") << text << "1 2 3\n";
  EXPECT_THROW(load_filter(dir / "extra.ckpt"), ParseError);
}

TEST(Metrics, JsonHasTheFixedKeys) {
  const fs::path dir = scratch("metrics");
  const RunMetrics m{0.95, 0.61, 4.5, 1.25, 128.0};
  write_metrics_json(m, dir / "m.json");
  EXPECT_EQ(read_metrics_json(dir / "m.json"), m);
  const auto j = nlohmann::json::parse(slurp(dir / "m.json"));
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  EXPECT_EQ(keys, (std::vector<std::string>{"distortion", "lambda_a", "priv_accuracy",
                                            "raw_accuracy", "utility_gap_pct"}));
}

// ---- commands ----------------------------------------------------------------------

TEST(CmdSynth, WritesHeaderAndOneRowPerRecord) {
  RunConfig cfg = small_run("synth");
  const fs::path path = cmd_synth(cfg);
  const auto rows = read_csv(path);
  ASSERT_EQ(rows.size(), cfg.synth.n_records + 1);
  for (const auto& r : rows) EXPECT_EQ(r.size(), 25u);
  bool negative = false;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < 24; ++j) negative |= std::stod(rows[i][j]) < 0.0;
  }
  EXPECT_TRUE(negative);
}

TEST(CmdSynth, FixedSeedGivesIdenticalBytes) {
  RunConfig a = small_run("synth_a"), b = small_run("synth_b");
  EXPECT_EQ(slurp(cmd_synth(a)), slurp(cmd_synth(b)));
  b.seed = 2;
  b.synth.seed = 8;
  EXPECT_NE(slurp(cmd_synth(a)), slurp(cmd_synth(b)));
}

TEST(CmdTrain, WritesArtifactsWithOneLogRowPerStep) {
  RunConfig cfg = small_run("train");
  cfg.checkpoint_every = 10;
  const RunMetrics m = cmd_train(cfg);
  const fs::path out(cfg.out_dir);
  for (const char* f : {"filter.ckpt", "adversary.ckpt", "train_log.csv", "metrics.json",
                        "config.ini", "checkpoints/step_000010_filter.ckpt"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  EXPECT_EQ(read_csv(out / "train_log.csv").size(), 21u);
  EXPECT_EQ(read_metrics_json(out / "metrics.json"), m);
  EXPECT_EQ(load_config(out / "config.ini"), cfg);
  EXPECT_EQ(m.lambda_a, cfg.train.lambda_a);
}

TEST(CmdTrain, NoPrivacyWeightKeepsAccuracyAndCost) {
  RunConfig cfg = small_run("train_zero");
  cfg.synth.n_records = 600;
  cfg.train.max_steps = 300;
  cfg.train.lr_adversary = 0.05;
  cfg.train.lambda_a = 0.0;
  const RunMetrics m = cmd_train(cfg);
  ASSERT_GE(m.raw_accuracy, 0.85);  // otherwise the comparison says nothing
  EXPECT_NEAR(m.priv_accuracy, m.raw_accuracy, 0.02);
  EXPECT_NEAR(m.utility_gap_pct, 0.0, 1.0);
}

TEST(CmdEval, IdentityFilterHasZeroCostDeltas) {
  RunConfig cfg = small_run("eval_identity");
  const fs::path ckpt = scratch("eval_identity_ckpt");
  save_filter(FilterWeights::zeros(24), ckpt / "filter.ckpt");
  save_adversary(init_params(24, 1), ckpt / "adversary.ckpt");
  const RunMetrics m = cmd_eval(cfg, ckpt);
  EXPECT_EQ(m.utility_gap_pct, 0.0);
  const auto rows = read_csv(fs::path(cfg.out_dir) / "eval_records.csv");
  ASSERT_EQ(rows[0][5], "cost_delta");
  ASSERT_EQ(rows.size(), prepare_data(cfg).test.size() + 1);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(std::stod(rows[i][5]), 0.0);
  EXPECT_EQ(rows[0].size(), 6u + 2u * 72u);
}

TEST(CmdEval, PrivateCostNeverBeatsTheRawOptimum) {
  RunConfig cfg = small_run("eval_noisy");
  const fs::path ckpt = scratch("eval_noisy_ckpt");
  FilterWeights w = init_filter(24, 2);
  w.gamma *= 20.0;
  w.V *= 20.0;
  save_filter(w, ckpt / "filter.ckpt");
  save_adversary(init_params(24, 1), ckpt / "adversary.ckpt");
  cmd_eval(cfg, ckpt);
  const auto rows = read_csv(fs::path(cfg.out_dir) / "eval_records.csv");
  bool moved = false;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double delta = std::stod(rows[i][5]);
    EXPECT_GE(delta, -1e-6) << "record " << rows[i][0];
    moved |= delta > 1e-6;
  }
  EXPECT_TRUE(moved);
}

TEST(CmdEval, RejectsCheckpointOfAnotherHorizon) {
  RunConfig cfg = small_run("eval_shape");
  const fs::path ckpt = scratch("eval_shape_ckpt");
  save_filter(FilterWeights::zeros(48), ckpt / "filter.ckpt");
  save_adversary(init_params(24, 1), ckpt / "adversary.ckpt");
  EXPECT_THROW(cmd_eval(cfg, ckpt), ParseError);
}

TEST(CmdSweep, SingletonListGivesOneRow) {
  RunConfig cfg = small_run("sweep");
  cfg.train.max_steps = 5;
  cfg.sweep_lambdas = {16.0};
  const auto rows = cmd_sweep(cfg);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].lambda_a, 16.0);
  EXPECT_TRUE(rows[0].error.empty());
  const auto csv = read_csv(fs::path(cfg.out_dir) / "sweep.csv");
  EXPECT_EQ(csv.size(), 2u);
}

TEST(CmdSweep, RejectsNegativeWeightBeforeTraining) {
  RunConfig cfg = small_run("sweep_bad");
  cfg.sweep_lambdas = {4.0, -1.0};
  EXPECT_THROW(cmd_sweep(cfg), InvalidArgument);
  EXPECT_FALSE(fs::exists(fs::path(cfg.out_dir) / "sweep.csv"));
}

TEST(CmdBench, DefaultGridHasSixteenRows) {
  RunConfig cfg = small_run("bench");
  EXPECT_EQ(cfg.bench.repeats, 8);
  const auto rows = cmd_bench(cfg);
  EXPECT_EQ(rows.size(), 16u);
  EXPECT_EQ(read_csv(fs::path(cfg.out_dir) / "bench.csv").size(), 17u);
  for (const auto& r : rows) EXPECT_GE(r.threads, 1);
}

}  // namespace
}  // namespace privctrl
