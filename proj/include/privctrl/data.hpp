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

// Labeled demand series: ingestion, synthesis, splitting, batching and the
// time-of-use price schedule.

#ifndef PRIVCTRL_DATA_HPP_
#define PRIVCTRL_DATA_HPP_

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "privctrl/common.hpp"

namespace privctrl {

/// One H-interval demand series (kWh per interval) with a binary label.
struct DemandRecord {
  Vector demand;
  int label = 0;

  /// Column 0 for class 0, column 1 for class 1.
  Eigen::Vector2d one_hot() const;
};

class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<DemandRecord> records, Index horizon,
          std::uint64_t split_seed = 0);

  const std::vector<DemandRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  Index horizon() const { return horizon_; }
  std::uint64_t split_seed() const { return split_seed_; }
  void set_split_seed(std::uint64_t seed) { split_seed_ = seed; }

  /// [p, 1 - p] where p is the empirical fraction of label-1 records.
  const Eigen::Vector2d& prior() const { return prior_; }

  /// Expected one-hot vector [P(label 0), P(label 1)].
  Eigen::Vector2d label_probs() const { return {prior_(1), prior_(0)}; }

  /// Records stacked row-wise, size() x horizon().
  Matrix demand_matrix() const;

 private:
  std::vector<DemandRecord> records_;
  Index horizon_ = 0;
  Eigen::Vector2d prior_ = Eigen::Vector2d::Zero();
  std::uint64_t split_seed_ = 0;
};

/// Reads H demand columns followed by one integer label column per row. A
/// non-numeric first line is treated as a header.
Dataset load_csv(const std::filesystem::path& path, Index horizon);

/// Writes a header row and values at 9 significant digits.
void write_csv(const Dataset& ds, const std::filesystem::path& path);

struct SynthConfig {
  std::size_t n_records = 4000;
  Index horizon = 24;
  double class0_peak = 2.0;
  double class1_peak = 3.5;
  /// Empty selects the high-price window of the default tariff.
  std::vector<Index> peak_hours;
  double base_load = 1.0;
  double noise_sd = 0.4;
  /// Midday generation subtracted from demand; 0 disables solar netting.
  double solar_depth = 2.5;
  double label1_fraction = 0.5;
  std::uint64_t seed = 7;

  void validate() const;
  std::vector<Index> resolved_peak_hours() const;
  bool operator==(const SynthConfig&) const = default;
};

Dataset synth_generate(const SynthConfig& cfg);

/// Seeded shuffle then partition; train gets ceil(fraction * n) records.
std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction);

struct Batch {
  Matrix demand;  // m x H
  std::vector<int> labels;
  Matrix one_hot;  // m x 2
  std::vector<std::size_t> indices;

  Index size() const { return demand.rows(); }
};

Batch make_batch(const Dataset& ds, std::span<const std::size_t> indices);

/// Endless stream of mini-batches. Every epoch is a fresh shuffle drawn from
/// the stream's own generator; the final short batch of an epoch is kept.
class BatchStream {
 public:
  BatchStream(const Dataset& ds, std::size_t batch_size, std::uint64_t seed);

  Batch next();
  std::size_t epoch() const { return epoch_; }

 private:
  void reshuffle();

  const Dataset* ds_;
  std::size_t batch_size_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::size_t epoch_ = 0;
};

/// All batches of a single epoch.
std::vector<Batch> epoch_batches(const Dataset& ds, std::size_t batch_size,
                                 std::uint64_t seed);

struct PriceTier {
  Index start = 0;  // inclusive interval index
  Index end = 0;    // exclusive
  double price = 0.0;

  bool operator==(const PriceTier&) const = default;
};

struct PriceSchedule {
  Vector prices;
  std::vector<PriceTier> tiers;

  Index horizon() const { return prices.size(); }
};

/// Two-tier tariff: 0.463/kWh from 4pm to 9pm, 0.202/kWh otherwise, mapped
/// onto H intervals per day (H must be a multiple of 24).
std::vector<PriceTier> default_tou_tiers(Index horizon);

PriceSchedule build_tou_prices(Index horizon, std::vector<PriceTier> tiers);
PriceSchedule build_tou_prices(Index horizon);

}  // namespace privctrl

#endif  // PRIVCTRL_DATA_HPP_
