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


// privctrl: synth | train | sweep | bench | eval

#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <string>

#include "privctrl/app.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Privacy filter training for battery-controlled demand series"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out_dir;
  app.add_option("--config", config_path, "INI run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "run seed (overrides [run] seed)");
  app.add_option("--threads", threads, "worker threads (overrides [run] threads)")
      ->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "output directory (overrides [run] out_dir)");

  auto* synth = app.add_subcommand("synth", "write a synthetic dataset to OUT/data.csv");
  auto* train = app.add_subcommand("train", "train filter and adversary, then evaluate");
  auto* sweep = app.add_subcommand("sweep", "train and evaluate once per [sweep] lambdas");
  auto* bench = app.add_subcommand("bench", "time batched QP solves over the [bench] grid");
  auto* eval = app.add_subcommand("eval", "score saved checkpoints on the test split");
  std::string ckpt_dir;
  eval->add_option("--checkpoints", ckpt_dir, "directory holding filter.ckpt and adversary.ckpt "
                                              "(default: OUT)");
  for (auto* sub : {synth, train, sweep, bench, eval}) sub->fallthrough();
  bool print_config = false;
  app.add_flag("--print-config", print_config, "print the effective configuration and exit");

  CLI11_PARSE(app, argc, argv);

  try {
    privctrl::RunConfig cfg =
        config_path.empty() ? privctrl::RunConfig{} : privctrl::load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
    if (out_dir) cfg.out_dir = *out_dir;
    cfg.validate();
    if (print_config) {
      std::fputs(privctrl::emit_config(cfg).c_str(), stdout);
      return 0;
    }

    if (synth->parsed()) {
      std::printf("%s\n", privctrl::cmd_synth(cfg).string().c_str());
    } else if (train->parsed()) {
      const auto m = privctrl::cmd_train(cfg);
      std::printf("raw_accuracy %.4f  priv_accuracy %.4f  utility_gap_pct %.4f  distortion %.4f\n",
                  m.raw_accuracy, m.priv_accuracy, m.utility_gap_pct, m.distortion);
    } else if (sweep->parsed()) {
      for (const auto& r : privctrl::cmd_sweep(cfg)) {
        std::printf("%g,%.4f,%.4f%s%s\n", r.lambda_a, r.accuracy, r.utility_gap_pct,
                    r.error.empty() ? "" : ",", r.error.c_str());
      }
    } else if (bench->parsed()) {
      std::printf("threads,batch,mean_s,sd_s\n");
      for (const auto& r : privctrl::cmd_bench(cfg)) {
        std::printf("%d,%zu,%.6g,%.3g\n", r.threads, r.batch, r.mean_s, r.sd_s);
      }
    } else if (eval->parsed()) {
      const auto m = privctrl::cmd_eval(cfg, ckpt_dir.empty() ? cfg.out_dir : ckpt_dir);
      std::printf("priv_accuracy %.4f  utility_gap_pct %.4f  distortion %.4f\n",
                  m.priv_accuracy, m.utility_gap_pct, m.distortion);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "privctrl: %s\n", e.what());
    return 1;
  }
  return 0;
}
