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


// Run configuration: a flat INI file with one section per component. Every
// field has a named key; absent keys keep their defaults.
//
//   [run]      seed, threads, out_dir, data_path, checkpoint_every, eval_seed,
//              raw_adversary_steps
//   [data]     train_fraction
//   [synth]    n_records, horizon, class0_peak, ...
//   [battery]  capacity, alpha, beta1..3, eta_in, eta_out, c_in, c_out, b_init
//   [price]    tiers = "start:end:price, ..." (empty for the default tariff)
//   [train]    lambda_a, kappa, kappa_v, lr_adversary, ...
//   [solver]   tol, max_iter, degenerate_margin, polish
//   [sweep]    lambdas = "8, 32, 128"
//   [bench]    horizon, batch_sizes, thread_counts (0 = all cores), repeats

#ifndef PRIVCTRL_CONFIG_HPP_
#define PRIVCTRL_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "privctrl/battery_qp.hpp"
#include "privctrl/data.hpp"
#include "privctrl/qp_engine.hpp"
#include "privctrl/trainer.hpp"

namespace privctrl {

/// Sub-streams of the run seed.
enum SeedStream : std::uint64_t {
  kSeedSynth = 101,
  kSeedSplit = 102,
  kSeedEval = 103,
};

struct BenchConfig {
  Index horizon = 24;
  std::vector<std::size_t> batch_sizes{1, 8, 32, 128};
  std::vector<int> thread_counts{1, 2, 4, 0};
  int repeats = 8;

  bool operator==(const BenchConfig&) const = default;
};

struct RunConfig {
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out_dir = "out";
  /// CSV to train on; empty synthesizes from `synth`.
  std::string data_path;
  /// Write numbered checkpoints every this many steps; 0 keeps only the last.
  int checkpoint_every = 0;
  /// Adversary trained on raw demand for the raw_accuracy baseline; a
  /// negative value uses train.max_steps.
  int raw_adversary_steps = -1;

  double train_fraction = 0.85;
  SynthConfig synth;
  BatterySpec battery;
  std::vector<PriceTier> tiers;
  TrainConfig train;
  SolverConfig solver;
  std::vector<double> sweep_lambdas{8.0, 32.0, 128.0};
  BenchConfig bench;

  void validate() const;

  /// Seeds and thread counts pushed down into the nested configs.
  SynthConfig synth_config() const;
  TrainConfig train_config() const;
  SolverConfig solver_config() const;
  std::uint64_t split_seed() const { return derive_seed(seed, kSeedSplit); }
  std::uint64_t eval_seed() const { return derive_seed(seed, kSeedEval); }
  int raw_steps() const { return raw_adversary_steps < 0 ? train.max_steps : raw_adversary_steps; }
  PriceSchedule price_schedule() const;

  bool operator==(const RunConfig&) const = default;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
std::string emit_config(const RunConfig& cfg);

}  // namespace privctrl

#endif  // PRIVCTRL_CONFIG_HPP_
