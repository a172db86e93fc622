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


#include "privctrl/io.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>

namespace privctrl {
namespace {

using nlohmann::json;

constexpr const char* kFormat = "privctrl-checkpoint";
constexpr int kVersion = 1;

std::string g9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error("write failed for " + path.string());
}

using Tensor = std::pair<std::string, Matrix>;

void save_tensors(const std::string& kind, Index horizon, const std::vector<Tensor>& tensors,
                  const std::filesystem::path& path) {
  json header = {{"format", kFormat}, {"version", kVersion}, {"kind", kind},
                 {"horizon", horizon}, {"tensors", json::array()}};
  for (const auto& [name, m] : tensors) {
    header["tensors"].push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  }
  std::ofstream out = open_out(path);
  out << header.dump() << '\n';
  for (const auto& [name, m] : tensors) {
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << g17(m(i, j));
      out << '\n';
    }
  }
  finish(out, path);
}

// Returns tensors in file order after checking kind, horizon and names.
std::vector<Matrix> load_tensors(const std::string& kind, Index horizon,
                                 const std::vector<std::string>& names,
                                 const std::filesystem::path& path, Index* stored_horizon) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty checkpoint");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": bad checkpoint header: " + e.what());
  }
  const auto fail = [&](const std::string& what) {
    throw ParseError(path.string() + ": " + what);
  };
  if (header.value("format", "") != kFormat) fail("not a checkpoint file");
  if (header.value("version", 0) != kVersion) fail("unsupported checkpoint version");
  if (header.value("kind", "") != kind) fail("checkpoint holds '" + header.value("kind", "") +
                                             "', expected '" + kind + "'");
  const Index h = header.value("horizon", Index{-1});
  if (h < 1) fail("missing horizon");
  if (horizon >= 0 && h != horizon) {
    fail("shape mismatch: checkpoint horizon " + std::to_string(h) + ", expected " +
         std::to_string(horizon));
  }
  *stored_horizon = h;
  const json& specs = header.at("tensors");
  if (!specs.is_array() || specs.size() != names.size()) fail("wrong tensor count");
  std::vector<Matrix> out;
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (specs[k].value("name", "") != names[k]) fail("expected tensor " + names[k]);
    const Index rows = specs[k].value("rows", Index{-1});
    const Index cols = specs[k].value("cols", Index{-1});
    if (rows < 0 || cols < 0) fail("bad shape for " + names[k]);
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
      if (!std::getline(in, line)) fail("truncated tensor " + names[k]);
      std::istringstream row(line);
      for (Index j = 0; j < cols; ++j) {
        if (!(row >> m(i, j))) fail("short row in " + names[k]);
      }
      std::string extra;
      if (row >> extra) fail("long row in " + names[k]);
    }
    out.push_back(std::move(m));
  }
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) fail("trailing data");
  }
  return out;
}

}  // namespace

void save_filter(const FilterWeights& w, const std::filesystem::path& path) {
  save_tensors("filter", w.horizon(), {{"gamma", w.gamma}, {"V", w.V}}, path);
}

FilterWeights load_filter(const std::filesystem::path& path, Index horizon) {
  Index h = 0;
  auto t = load_tensors("filter", horizon, {"gamma", "V"}, path, &h);
  if (t[0].rows() != h || t[0].cols() != 1 || t[1].rows() != h || t[1].cols() != 2) {
    throw ParseError(path.string() + ": shape mismatch in filter tensors");
  }
  FilterWeights w;
  w.gamma = t[0].col(0);
  w.V = std::move(t[1]);
  return w;
}

void save_adversary(const MlpParams& p, const std::filesystem::path& path) {
  save_tensors("adversary", p.horizon(),
               {{"W1", p.W1}, {"b1", p.b1}, {"W2", p.W2}, {"b2", p.b2}, {"W3", p.W3},
                {"b3", p.b3}},
               path);
}

MlpParams load_adversary(const std::filesystem::path& path, Index horizon) {
  Index h = 0;
  auto t = load_tensors("adversary", horizon, {"W1", "b1", "W2", "b2", "W3", "b3"}, path, &h);
  const MlpParams ref = MlpParams::zeros(h);
  const Matrix* shapes[] = {&ref.W1, nullptr, &ref.W2, nullptr, &ref.W3, nullptr};
  const Vector* vshapes[] = {nullptr, &ref.b1, nullptr, &ref.b2, nullptr, &ref.b3};
  for (std::size_t k = 0; k < t.size(); ++k) {
    const Index r = shapes[k] ? shapes[k]->rows() : vshapes[k]->size();
    const Index c = shapes[k] ? shapes[k]->cols() : 1;
    if (t[k].rows() != r || t[k].cols() != c) {
      throw ParseError(path.string() + ": shape mismatch in adversary tensors");
    }
  }
  MlpParams p;
  p.W1 = std::move(t[0]);
  p.b1 = t[1].col(0);
  p.W2 = std::move(t[2]);
  p.b2 = t[3].col(0);
  p.W3 = std::move(t[4]);
  p.b3 = t[5].col(0);
  return p;
}

void write_metrics_json(const RunMetrics& m, const std::filesystem::path& path) {
  const json j = {{"raw_accuracy", m.raw_accuracy},
                  {"priv_accuracy", m.priv_accuracy},
                  {"utility_gap_pct", m.utility_gap_pct},
                  {"distortion", m.distortion},
                  {"lambda_a", m.lambda_a}};
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
  finish(out, path);
}

RunMetrics read_metrics_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    const json j = json::parse(in);
    return {j.at("raw_accuracy"), j.at("priv_accuracy"), j.at("utility_gap_pct"),
            j.at("distortion"), j.at("lambda_a")};
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_train_log_csv(const TrainLog& log, const std::filesystem::path& path) {
  std::ofstream out = open_out(path);
  out << "step,adversary_loss,utility_loss,distortion,lr_generator,skipped,param_delta,"
         "test_accuracy,utility_gap_pct\n";
  for (const auto& r : log.steps) {
    out << r.step << ',' << g9(r.adversary_loss) << ',' << g9(r.utility_loss) << ','
        << g9(r.distortion) << ',' << g9(r.lr_generator) << ',' << r.skipped << ','
        << g9(r.param_delta) << ',' << g9(r.test_accuracy) << ',' << g9(r.utility_gap_pct)
        << '\n';
  }
  finish(out, path);
}

void write_eval_csv(const Dataset& test, const EvalMetrics& m, const std::filesystem::path& path) {
  if (m.records.size() != test.size()) {
    throw InvalidArgument("evaluation records do not match the test set");
  }
  const Index H = test.horizon();
  std::ofstream out = open_out(path);
  out << "record,label,solved,raw_cost,priv_cost,cost_delta";
  for (const char* which : {"raw", "priv"}) {
    for (const char* block : {"x_in", "x_out", "x_s"}) {
      for (Index j = 0; j < H; ++j) out << ',' << which << '_' << block << '_' << j;
    }
  }
  out << '\n';
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    const RecordEval& r = m.records[i];
    out << i << ',' << test.records()[i].label << ',' << (r.solved ? 1 : 0) << ','
        << g9(r.raw_cost) << ',' << g9(r.priv_cost) << ',' << g9(r.priv_cost - r.raw_cost);
    for (const Vector* x : {&r.x_raw, &r.x_priv}) {
      for (Index k = 0; k < 3 * H; ++k) {
        out << ',' << (x->size() == 3 * H ? g9((*x)(k)) : std::string("nan"));
      }
    }
    out << '\n';
  }
  finish(out, path);
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  std::ofstream out = open_out(path);
  out << "lambda_a,accuracy,utility_gap_pct,distortion,error\n";
  for (const auto& r : rows) {
    std::string err = r.error;
    for (char& c : err) {
      if (c == ',' || c == '\n' || c == '"') c = ' ';
    }
    out << g9(r.lambda_a) << ',' << g9(r.accuracy) << ',' << g9(r.utility_gap_pct) << ','
        << g9(r.distortion) << ',' << err << '\n';
  }
  finish(out, path);
}

}  // namespace privctrl
