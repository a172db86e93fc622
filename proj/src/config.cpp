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


#include "privctrl/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace privctrl {
namespace {

namespace pt = boost::property_tree;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Shortest text that parses back to the same double.
std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const std::string s = trim(text);
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw ParseError("config key '" + key + "': cannot parse '" + text + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ParseError("config key '" + key + "': expected true or false, got '" + text + "'");
}

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

using Table = std::map<std::string, std::map<std::string, Field>>;

template <class T, class Member>
Field number(Member m) {
  return {[m](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt(std::invoke(m, c));
            else return std::to_string(std::invoke(m, c));
          },
          [m](RunConfig& c, const std::string& s) { std::invoke(m, c) = parse_number<T>("", s); }};
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    if constexpr (std::is_floating_point_v<T>) out += fmt(v[i]);
    else out += std::to_string(v[i]);
  }
  return out;
}

template <class T>
std::vector<T> parse_list(const std::string& s) {
  std::vector<T> out;
  for (const auto& item : split_list(s, ',')) out.push_back(parse_number<T>("", item));
  return out;
}

#define NUM(T, expr) number<T>([](auto& c) -> auto& { return c.expr; })

const Table& table() {
  static const Table t = {
      {"run",
       {{"seed", NUM(std::uint64_t, seed)},
        {"threads", NUM(int, threads)},
        {"out_dir", {[](const RunConfig& c) { return c.out_dir; },
                     [](RunConfig& c, const std::string& s) { c.out_dir = trim(s); }}},
        {"data_path", {[](const RunConfig& c) { return c.data_path; },
                       [](RunConfig& c, const std::string& s) { c.data_path = trim(s); }}},
        {"checkpoint_every", NUM(int, checkpoint_every)},
        {"raw_adversary_steps", NUM(int, raw_adversary_steps)}}},
      {"data", {{"train_fraction", NUM(double, train_fraction)}}},
      {"synth",
       {{"n_records", NUM(std::size_t, synth.n_records)},
        {"horizon", NUM(Index, synth.horizon)},
        {"class0_peak", NUM(double, synth.class0_peak)},
        {"class1_peak", NUM(double, synth.class1_peak)},
        {"peak_hours", {[](const RunConfig& c) { return join(c.synth.peak_hours); },
                        [](RunConfig& c, const std::string& s) {
                          c.synth.peak_hours = parse_list<Index>(s);
                        }}},
        {"base_load", NUM(double, synth.base_load)},
        {"noise_sd", NUM(double, synth.noise_sd)},
        {"solar_depth", NUM(double, synth.solar_depth)},
        {"label1_fraction", NUM(double, synth.label1_fraction)}}},
      {"battery",
       {{"capacity", NUM(double, battery.capacity)},
        {"alpha", NUM(double, battery.alpha)},
        {"beta1", NUM(double, battery.beta1)},
        {"beta2", NUM(double, battery.beta2)},
        {"beta3", NUM(double, battery.beta3)},
        {"eta_in", NUM(double, battery.eta_in)},
        {"eta_out", NUM(double, battery.eta_out)},
        {"c_in", NUM(double, battery.c_in)},
        {"c_out", NUM(double, battery.c_out)},
        {"b_init", NUM(double, battery.b_init)}}},
      {"price",
       {{"tiers", {[](const RunConfig& c) {
                     std::string out;
                     for (std::size_t i = 0; i < c.tiers.size(); ++i) {
                       if (i) out += ", ";
                       out += std::to_string(c.tiers[i].start) + ":" +
                              std::to_string(c.tiers[i].end) + ":" + fmt(c.tiers[i].price);
                     }
                     return out;
                   },
                   [](RunConfig& c, const std::string& s) {
                     c.tiers.clear();
                     for (const auto& item : split_list(s, ',')) {
                       const auto parts = split_list(item, ':');
                       if (parts.size() != 3) {
                         throw ParseError("price tier '" + item + "' is not start:end:price");
                       }
                       c.tiers.push_back({parse_number<Index>("tiers", parts[0]),
                                          parse_number<Index>("tiers", parts[1]),
                                          parse_number<double>("tiers", parts[2])});
                     }
                   }}}}},
      {"train",
       {{"lambda_a", NUM(double, train.lambda_a)},
        {"kappa", NUM(double, train.kappa)},
        {"kappa_v", {[](const RunConfig& c) {
                       return c.train.kappa_v ? fmt(*c.train.kappa_v) : std::string();
                     },
                     [](RunConfig& c, const std::string& s) {
                       if (trim(s).empty()) c.train.kappa_v.reset();
                       else c.train.kappa_v = parse_number<double>("kappa_v", s);
                     }}},
        {"lr_adversary", NUM(double, train.lr_adversary)},
        {"lr_generator", NUM(double, train.lr_generator)},
        {"lr_decay", NUM(double, train.lr_decay)},
        {"decay_interval", NUM(int, train.decay_interval)},
        {"batch_size", NUM(std::size_t, train.batch_size)},
        {"max_steps", NUM(int, train.max_steps)},
        {"convergence_tol", NUM(double, train.convergence_tol)},
        {"convergence_window", NUM(int, train.convergence_window)},
        {"schedule", {[](const RunConfig& c) { return std::string(to_string(c.train.schedule)); },
                      [](RunConfig& c, const std::string& s) {
                        c.train.schedule = schedule_mode_from_string(trim(s));
                      }}},
        {"penalty_form",
         {[](const RunConfig& c) { return std::string(to_string(c.train.penalty_form)); },
          [](RunConfig& c, const std::string& s) {
            c.train.penalty_form = penalty_form_from_string(trim(s));
          }}},
        {"eval_every", NUM(int, train.eval_every)}}},
      {"solver",
       {{"tol", NUM(double, solver.tol)},
        {"max_iter", NUM(int, solver.max_iter)},
        {"degenerate_margin", NUM(double, solver.degenerate_margin)},
        {"polish", {[](const RunConfig& c) { return std::string(c.solver.polish ? "true" : "false"); },
                    [](RunConfig& c, const std::string& s) {
                      c.solver.polish = parse_bool("polish", s);
                    }}}}},
      {"sweep",
       {{"lambdas", {[](const RunConfig& c) { return join(c.sweep_lambdas); },
                     [](RunConfig& c, const std::string& s) {
                       c.sweep_lambdas = parse_list<double>(s);
                     }}}}},
      {"bench",
       {{"horizon", NUM(Index, bench.horizon)},
        {"batch_sizes", {[](const RunConfig& c) { return join(c.bench.batch_sizes); },
                         [](RunConfig& c, const std::string& s) {
                           c.bench.batch_sizes = parse_list<std::size_t>(s);
                         }}},
        {"thread_counts", {[](const RunConfig& c) { return join(c.bench.thread_counts); },
                           [](RunConfig& c, const std::string& s) {
                             c.bench.thread_counts = parse_list<int>(s);
                           }}},
        {"repeats", NUM(int, bench.repeats)}}},
  };
  return t;
}

#undef NUM

}  // namespace

void RunConfig::validate() const {
  if (threads < 1) throw InvalidArgument("run.threads must be at least 1");
  if (out_dir.empty()) throw InvalidArgument("run.out_dir must not be empty");
  if (checkpoint_every < 0) throw InvalidArgument("run.checkpoint_every must be >= 0");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidArgument("data.train_fraction must lie in (0, 1)");
  }
  synth_config().validate();
  battery.validate();
  price_schedule();
  train_config().validate();
  solver_config().validate();
  if (sweep_lambdas.empty()) throw InvalidArgument("sweep.lambdas must not be empty");
  for (double l : sweep_lambdas) {
    if (!(l >= 0.0)) throw InvalidArgument("sweep.lambdas must be nonnegative");
  }
  if (bench.repeats < 2) throw InvalidArgument("bench.repeats must be at least 2");
  if (bench.batch_sizes.empty() || bench.thread_counts.empty()) {
    throw InvalidArgument("bench grid must not be empty");
  }
  for (int t : bench.thread_counts) {
    if (t < 0) throw InvalidArgument("bench.thread_counts must be >= 0 (0 = all cores)");
  }
}

SynthConfig RunConfig::synth_config() const {
  SynthConfig s = synth;
  s.seed = derive_seed(seed, kSeedSynth);
  return s;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t = train;
  t.seed = seed;
  t.threads = threads;
  return t;
}

SolverConfig RunConfig::solver_config() const {
  SolverConfig s = solver;
  s.threads = threads;
  return s;
}

PriceSchedule RunConfig::price_schedule() const {
  return tiers.empty() ? build_tou_prices(synth.horizon) : build_tou_prices(synth.horizon, tiers);
}

RunConfig parse_config(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  RunConfig cfg;
  const Table& t = table();
  for (const auto& [section, body] : tree) {
    const auto sec = t.find(section);
    if (sec == t.end()) throw ParseError("config: unknown section [" + section + "]");
    if (!body.data().empty()) throw ParseError("config: key '" + section + "' outside a section");
    for (const auto& [key, node] : body) {
      const auto f = sec->second.find(key);
      if (f == sec->second.end()) {
        throw ParseError("config: unknown key '" + key + "' in [" + section + "]");
      }
      try {
        f->second.set(cfg, node.data());
      } catch (const ParseError&) {
        throw ParseError("config: bad value for " + section + "." + key + ": '" + node.data() +
                         "'");
      } catch (const InvalidArgument& e) {
        throw ParseError("config: " + section + "." + key + ": " + e.what());
      }
    }
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string emit_config(const RunConfig& cfg) {
  std::string out;
  for (const char* section :
       {"run", "data", "synth", "battery", "price", "train", "solver", "sweep", "bench"}) {
    out += std::string(out.empty() ? "" : "\n") + "[" + section + "]\n";
    for (const auto& [key, field] : table().at(section)) {
      out += key + " = " + field.get(cfg) + "\n";
    }
  }
  return out;
}

}  // namespace privctrl
