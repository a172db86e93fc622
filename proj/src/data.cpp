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

#include "privctrl/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string_view>

namespace privctrl {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view field, double& out) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  if (field.empty()) return false;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  return ec == std::errc() && ptr == field.data() + field.size();
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

std::string format_g9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

Eigen::Vector2d DemandRecord::one_hot() const {
  return label == 0 ? Eigen::Vector2d(1.0, 0.0) : Eigen::Vector2d(0.0, 1.0);
}

Dataset::Dataset(std::vector<DemandRecord> records, Index horizon,
                 std::uint64_t split_seed)
    : records_(std::move(records)), horizon_(horizon), split_seed_(split_seed) {
  if (horizon_ <= 0) throw InvalidArgument("dataset horizon must be positive");
  std::size_t positives = 0;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (r.demand.size() != horizon_) {
      throw InvalidArgument("record " + std::to_string(i) + " has length " +
                            std::to_string(r.demand.size()) + ", expected " +
                            std::to_string(horizon_));
    }
    if (r.label != 0 && r.label != 1) {
      throw InvalidArgument("record " + std::to_string(i) + " has non-binary label");
    }
    positives += static_cast<std::size_t>(r.label);
  }
  const double p = records_.empty()
                       ? 0.0
                       : static_cast<double>(positives) /
                             static_cast<double>(records_.size());
  prior_ = {p, 1.0 - p};
}

Matrix Dataset::demand_matrix() const {
  Matrix m(static_cast<Index>(records_.size()), horizon_);
  for (std::size_t i = 0; i < records_.size(); ++i) {
    m.row(static_cast<Index>(i)) = records_[i].demand.transpose();
  }
  return m;
}

Dataset load_csv(const std::filesystem::path& path, Index horizon) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());

  std::vector<DemandRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = trim(line);
    if (view.empty()) continue;
    const auto fields = split_fields(view);

    double first = 0.0;
    if (line_no == 1 && !parse_double(fields.front(), first)) continue;  // header

    if (static_cast<Index>(fields.size()) != horizon + 1) {
      throw ParseError("row " + std::to_string(line_no) + ": expected " +
                       std::to_string(horizon + 1) + " columns, found " +
                       std::to_string(fields.size()));
    }
    DemandRecord rec;
    rec.demand.resize(horizon);
    for (Index j = 0; j < horizon; ++j) {
      if (!parse_double(fields[static_cast<std::size_t>(j)], rec.demand(j))) {
        throw ParseError("row " + std::to_string(line_no) + ": column " +
                         std::to_string(j + 1) + " is not numeric");
      }
    }
    double label = 0.0;
    if (!parse_double(fields.back(), label) || (label != 0.0 && label != 1.0)) {
      throw ParseError("row " + std::to_string(line_no) +
                       ": label must be 0 or 1");
    }
    rec.label = static_cast<int>(label);
    records.push_back(std::move(rec));
  }
  if (records.empty()) throw ParseError(path.string() + ": no data rows");
  return Dataset(std::move(records), horizon);
}

void write_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (Index j = 0; j < ds.horizon(); ++j) out << 'd' << j << ',';
  out << "label\n";
  for (const auto& r : ds.records()) {
    for (Index j = 0; j < ds.horizon(); ++j) out << format_g9(r.demand(j)) << ',';
    out << r.label << '\n';
  }
  if (!out) throw Error("write failed for " + path.string());
}

void SynthConfig::validate() const {
  if (n_records < 2) throw InvalidArgument("synthetic dataset needs at least 2 records");
  if (horizon < 1) throw InvalidArgument("horizon must be positive");
  if (noise_sd < 0.0) throw InvalidArgument("noise sd must be nonnegative");
  if (std::abs(class1_peak - class0_peak) < 3.0 * noise_sd) {
    throw InvalidArgument("class peak heights must differ by at least 3 noise sd");
  }
  if (label1_fraction <= 0.0 || label1_fraction >= 1.0) {
    throw InvalidArgument("label1_fraction must lie in (0, 1)");
  }
  for (Index h : peak_hours) {
    if (h < 0 || h >= horizon) throw InvalidArgument("peak hour out of range");
  }
}

std::vector<Index> SynthConfig::resolved_peak_hours() const {
  if (!peak_hours.empty()) return peak_hours;
  std::vector<Index> hours;
  const Index lo = horizon * 16 / 24;
  const Index hi = std::max(lo + 1, horizon * 21 / 24);
  for (Index h = lo; h < hi && h < horizon; ++h) hours.push_back(h);
  return hours;
}

Dataset synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  const Index H = cfg.horizon;
  const auto peaks = cfg.resolved_peak_hours();
  std::vector<bool> is_peak(static_cast<std::size_t>(H), false);
  for (Index h : peaks) is_peak[static_cast<std::size_t>(h)] = true;

  // Solar bell between 9am and 4pm.
  Vector solar = Vector::Zero(H);
  const double sun_lo = static_cast<double>(H) * 9.0 / 24.0;
  const double sun_hi = static_cast<double>(H) * 16.0 / 24.0;
  for (Index j = 0; j < H; ++j) {
    const double t = (static_cast<double>(j) + 0.5 - sun_lo) / (sun_hi - sun_lo);
    if (t > 0.0 && t < 1.0 && !is_peak[static_cast<std::size_t>(j)]) {
      solar(j) = std::sin(std::numbers::pi * t);
    }
  }

  std::mt19937_64 rng(cfg.seed);
  std::bernoulli_distribution coin(cfg.label1_fraction);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> cloud(0.6, 1.0);

  std::vector<DemandRecord> records;
  records.reserve(cfg.n_records);
  for (std::size_t i = 0; i < cfg.n_records; ++i) {
    DemandRecord rec;
    rec.label = coin(rng) ? 1 : 0;
    const double peak = rec.label == 1 ? cfg.class1_peak : cfg.class0_peak;
    const double sun = cfg.solar_depth > 0.0 ? cfg.solar_depth * cloud(rng) : 0.0;
    rec.demand.resize(H);
    for (Index j = 0; j < H; ++j) {
      const double level = is_peak[static_cast<std::size_t>(j)] ? peak : cfg.base_load;
      const double noise = cfg.noise_sd > 0.0 ? cfg.noise_sd * gauss(rng) : 0.0;
      rec.demand(j) = level + noise - sun * solar(j);
    }
    records.push_back(std::move(rec));
  }
  return Dataset(std::move(records), H, cfg.seed);
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidArgument("train fraction must lie in (0, 1)");
  }
  const std::size_t n = ds.size();
  const auto n_train = static_cast<std::size_t>(
      std::ceil(train_fraction * static_cast<double>(n) - 1e-9));
  if (n_train == 0) throw InvalidArgument("train split empty");
  if (n_train >= n) throw InvalidArgument("test split empty");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(ds.split_seed());
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<DemandRecord> train, test;
  train.reserve(n_train);
  test.reserve(n - n_train);
  for (std::size_t k = 0; k < n; ++k) {
    (k < n_train ? train : test).push_back(ds.records()[order[k]]);
  }
  return {Dataset(std::move(train), ds.horizon(), ds.split_seed()),
          Dataset(std::move(test), ds.horizon(), ds.split_seed())};
}

Batch make_batch(const Dataset& ds, std::span<const std::size_t> indices) {
  Batch b;
  const auto m = static_cast<Index>(indices.size());
  b.demand.resize(m, ds.horizon());
  b.one_hot.resize(m, 2);
  b.labels.reserve(indices.size());
  b.indices.assign(indices.begin(), indices.end());
  for (Index i = 0; i < m; ++i) {
    const auto& rec = ds.records()[indices[static_cast<std::size_t>(i)]];
    b.demand.row(i) = rec.demand.transpose();
    b.one_hot.row(i) = rec.one_hot().transpose();
    b.labels.push_back(rec.label);
  }
  return b;
}

BatchStream::BatchStream(const Dataset& ds, std::size_t batch_size,
                         std::uint64_t seed)
    : ds_(&ds), batch_size_(batch_size), rng_(seed), order_(ds.size()) {
  if (batch_size_ < 1 || batch_size_ > ds.size()) {
    throw InvalidArgument("batch size must lie in [1, n]");
  }
  reshuffle();
}

void BatchStream::reshuffle() {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::shuffle(order_.begin(), order_.end(), rng_);
  cursor_ = 0;
}

Batch BatchStream::next() {
  if (cursor_ >= order_.size()) {
    ++epoch_;
    reshuffle();
  }
  const std::size_t count = std::min(batch_size_, order_.size() - cursor_);
  Batch b = make_batch(*ds_, std::span(order_).subspan(cursor_, count));
  cursor_ += count;
  return b;
}

std::vector<Batch> epoch_batches(const Dataset& ds, std::size_t batch_size,
                                 std::uint64_t seed) {
  BatchStream stream(ds, batch_size, seed);
  std::vector<Batch> out;
  while (stream.epoch() == 0) {
    out.push_back(stream.next());
    if (out.size() * batch_size >= ds.size()) break;
  }
  return out;
}

std::vector<PriceTier> default_tou_tiers(Index horizon) {
  if (horizon <= 0 || horizon % 24 != 0) {
    throw InvalidArgument("default tariff needs a horizon that is a multiple of 24");
  }
  const Index per_hour = horizon / 24;
  return {{0, 16 * per_hour, 0.202},
          {16 * per_hour, 21 * per_hour, 0.463},
          {21 * per_hour, horizon, 0.202}};
}

PriceSchedule build_tou_prices(Index horizon, std::vector<PriceTier> tiers) {
  if (horizon <= 0) throw InvalidArgument("price horizon must be positive");
  std::sort(tiers.begin(), tiers.end(),
            [](const PriceTier& a, const PriceTier& b) { return a.start < b.start; });
  Index covered = 0;
  PriceSchedule sched;
  sched.prices.resize(horizon);
  for (const auto& t : tiers) {
    if (t.start < covered) throw InvalidArgument("price tiers overlap");
    if (t.start > covered) throw InvalidArgument("price tiers leave a gap");
    if (t.end <= t.start || t.end > horizon) throw InvalidArgument("price tier out of range");
    if (!(t.price > 0.0)) throw InvalidArgument("prices must be strictly positive");
    sched.prices.segment(t.start, t.end - t.start).setConstant(t.price);
    covered = t.end;
  }
  if (covered != horizon) throw InvalidArgument("price tiers leave a gap");
  sched.tiers = std::move(tiers);
  return sched;
}

PriceSchedule build_tou_prices(Index horizon) {
  return build_tou_prices(horizon, default_tou_tiers(horizon));
}

}  // namespace privctrl
