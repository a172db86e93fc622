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


#include "privctrl/app.hpp"

#include <omp.h>

#include <cstdio>
#include <fstream>
#include <set>

namespace privctrl {
namespace {

namespace fs = std::filesystem;

fs::path out_path(const RunConfig& cfg, const std::string& name) {
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  return dir / name;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

}  // namespace

DataSplit prepare_data(const RunConfig& cfg) {
  cfg.validate();
  Dataset all = cfg.data_path.empty() ? synth_generate(cfg.synth_config())
                                      : load_csv(cfg.data_path, cfg.synth.horizon);
  all.set_split_seed(cfg.split_seed());
  auto [train, test] = split(all, cfg.train_fraction);
  return {std::move(train), std::move(test)};
}

ControlProblem make_problem(const RunConfig& cfg) {
  return {cfg.battery, cfg.price_schedule(), cfg.solver_config()};
}

double raw_accuracy(const RunConfig& cfg, const DataSplit& data) {
  const MlpParams raw = train_raw_adversary(data.train, cfg.train_config(), cfg.raw_steps());
  return accuracy(raw, data.test);
}

TrainOutcome train_and_evaluate(const RunConfig& cfg, const DataSplit& data, double raw_acc,
                                const StepCallback& on_step) {
  const ControlProblem prob = make_problem(cfg);
  TrainOutcome out;
  out.result = train(data.train, &data.test, prob, cfg.train_config(), std::nullopt, on_step);
  out.eval = evaluate(out.result.filter, out.result.adversary, data.test, prob, cfg.eval_seed(),
                      true);
  out.metrics = {raw_acc, out.eval.priv_accuracy, out.eval.utility_gap_pct,
                 out.eval.distortion, cfg.train.lambda_a};
  return out;
}

fs::path cmd_synth(const RunConfig& cfg) {
  cfg.validate();
  const fs::path path = out_path(cfg, "data.csv");
  write_csv(synth_generate(cfg.synth_config()), path);
  return path;
}

RunMetrics cmd_train(const RunConfig& cfg) {
  const DataSplit data = prepare_data(cfg);
  write_text(out_path(cfg, "config.ini"), emit_config(cfg));
  const double raw_acc = raw_accuracy(cfg, data);
  std::fprintf(stderr, "raw adversary test accuracy %.4f\n", raw_acc);

  const fs::path ckpt_dir = fs::path(cfg.out_dir) / "checkpoints";
  const StepCallback on_step = [&](const StepRecord& r, const FilterWeights& w,
                                   const MlpParams& p) {
    if (r.step % 50 == 0) {
      std::fprintf(stderr, "step %d  adv %.4f  util %.4f  dist %.4f\n", r.step,
                   r.adversary_loss, r.utility_loss, r.distortion);
    }
    if (cfg.checkpoint_every > 0 && r.step % cfg.checkpoint_every == 0) {
      char tag[32];
      std::snprintf(tag, sizeof tag, "step_%06d", r.step);
      save_filter(w, ckpt_dir / (std::string(tag) + "_filter.ckpt"));
      save_adversary(p, ckpt_dir / (std::string(tag) + "_adversary.ckpt"));
    }
  };
  const TrainOutcome o = train_and_evaluate(cfg, data, raw_acc, on_step);
  save_filter(o.result.filter, out_path(cfg, "filter.ckpt"));
  save_adversary(o.result.adversary, out_path(cfg, "adversary.ckpt"));
  write_train_log_csv(o.result.log, out_path(cfg, "train_log.csv"));
  write_metrics_json(o.metrics, out_path(cfg, "metrics.json"));
  return o.metrics;
}

std::vector<SweepRow> cmd_sweep(const RunConfig& cfg) {
  const DataSplit data = prepare_data(cfg);
  const double raw_acc = raw_accuracy(cfg, data);
  std::vector<SweepRow> rows;
  for (double lambda : cfg.sweep_lambdas) {
    SweepRow row;
    row.lambda_a = lambda;
    try {
      RunConfig point = cfg;
      point.train.lambda_a = lambda;
      const TrainOutcome o = train_and_evaluate(point, data, raw_acc);
      row.accuracy = o.metrics.priv_accuracy;
      row.utility_gap_pct = o.metrics.utility_gap_pct;
      row.distortion = o.metrics.distortion;
    } catch (const std::exception& e) {
      row.accuracy = row.utility_gap_pct = row.distortion =
          std::numeric_limits<double>::quiet_NaN();
      row.error = e.what();
    }
    std::fprintf(stderr, "lambda_a %g  accuracy %.4f  gap %.4f%%%s%s\n", lambda, row.accuracy,
                 row.utility_gap_pct, row.error.empty() ? "" : "  error: ", row.error.c_str());
    rows.push_back(row);
    write_sweep_csv(rows, out_path(cfg, "sweep.csv"));
  }
  return rows;
}

std::vector<BenchRow> cmd_bench(const RunConfig& cfg) {
  cfg.validate();
  std::vector<int> threads;
  for (int t : cfg.bench.thread_counts) threads.push_back(t == 0 ? omp_get_num_procs() : t);
  std::vector<BenchRow> rows;
  for (std::size_t batch : cfg.bench.batch_sizes) {
    const auto part = bench(cfg.bench.horizon, batch, threads, cfg.bench.repeats, cfg.seed);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  write_bench_csv(rows, out_path(cfg, "bench.csv"));
  return rows;
}

RunMetrics cmd_eval(const RunConfig& cfg, const fs::path& ckpt_dir) {
  const DataSplit data = prepare_data(cfg);
  const Index H = data.test.horizon();
  const FilterWeights w = load_filter(ckpt_dir / "filter.ckpt", H);
  const MlpParams p = load_adversary(ckpt_dir / "adversary.ckpt", H);
  const EvalMetrics m = evaluate(w, p, data.test, make_problem(cfg), cfg.eval_seed(), true);
  const RunMetrics out{raw_accuracy(cfg, data), m.priv_accuracy, m.utility_gap_pct,
                       m.distortion, cfg.train.lambda_a};
  write_metrics_json(out, out_path(cfg, "eval_metrics.json"));
  std::fprintf(stderr, "retrained adversary test accuracy %.4f\n",
               retrained_accuracy(w, data.train, data.test, cfg.train_config(), cfg.raw_steps(),
                                  cfg.eval_seed()));
  write_eval_csv(data.test, m, out_path(cfg, "eval_records.csv"));
  return out;
}

}  // namespace privctrl
