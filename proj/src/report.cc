// Copyright 2026 The ADP-SGD Authors
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
//
// Report files:
//   report.json   full ComparisonReport (non-finite numbers become null)
//   summary.csv   arm_id,mean,std,achieved_eps,bound_value
//   runs/<arm>_<seed_index>.csv   per-iteration RunLog
//   runs/<arm>_<seed_index>.json  run summary
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <system_error>

#include "adpsgd/errors.h"
#include "adpsgd/harness.h"
#include "json.hpp"

namespace adpsgd {
namespace {

using nlohmann::ordered_json;

ordered_json Number(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

ordered_json BudgetJson(const std::optional<PrivacyBudget>& b) {
  if (!b) return nullptr;
  return ordered_json{{"epsilon", Number(b->epsilon)}, {"delta", Number(b->delta)}};
}

ordered_json SummaryJson(const RunSummary& s) {
  ordered_json out;
  out["tau"] = s.tau ? ordered_json(*s.tau) : ordered_json(nullptr);
  out["min_grad_norm_sq"] = Number(s.min_grad_norm_sq);
  out["final_grad_norm_sq"] = Number(s.final_grad_norm_sq);
  out["final_loss"] = Number(s.final_loss);
  return out;
}

ordered_json ConfigJson(const KeyValues& config) {
  ordered_json out = ordered_json::object();
  for (const auto& [key, value] : config) out[key] = value;
  return out;
}

void WriteFile(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << content;
  out.close();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

double ParseCsvDouble(const std::string& s, const std::string& path) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw IoError("'" + path + "': cannot parse '" + s + "' as a number");
  }
  return out;
}

std::string RunStem(const std::string& arm_id, std::int64_t seed_index) {
  return arm_id + "_" + std::to_string(seed_index);
}

}  // namespace

std::string RunLogCsv(const RunLog& log) {
  std::string out = "t,loss,batch_grad_norm,full_grad_norm,b_next,alpha_next,noise_norm\n";
  for (const IterationRecord& r : log.records) {
    out += std::to_string(r.t);
    for (double v : {r.loss, r.batch_grad_norm, r.full_grad_norm, r.b_next,
                     r.alpha_next, r.noise_norm}) {
      out += ',';
      out += FormatDouble(v);
    }
    out += '\n';
  }
  return out;
}

std::string RunSummaryJson(const RunLog& log, const KeyValues& config,
                           const std::optional<PrivacyBudget>& achieved) {
  ordered_json out = SummaryJson(log.summary);
  out["eta"] = Number(log.eta);
  out["sigma"] = Number(log.sigma);
  out["iterations"] = log.records.size();
  out["achieved_composition_audit"] = BudgetJson(achieved);
  out["config"] = ConfigJson(config);
  return out.dump(2) + "\n";
}

void EmitReport(const ComparisonReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  std::error_code ec;
  fs::create_directories(root / "runs", ec);
  if (ec) throw IoError("cannot create '" + (root / "runs").string() + "': " + ec.message());

  ordered_json doc;
  doc["config"] = ConfigJson(report.config);
  doc["arms"] = ordered_json::array();
  std::string summary = "arm_id,mean,std,achieved_eps,bound_value\n";
  for (const ArmReport& arm : report.arms) {
    ordered_json a;
    a["id"] = arm.id;
    a["step"] = arm.step;
    a["noise"] = arm.noise;
    a["sigma"] = Number(arm.sigma);
    a["target"] = BudgetJson(arm.target);
    a["achieved_composition_audit"] = BudgetJson(arm.achieved);
    a["bound"] = {{"name", arm.bound_name}, {"value", Number(arm.bound_value)}};
    a["error"] = arm.error;
    a["mean_min_grad_norm_sq"] = Number(arm.mean_min_grad_norm_sq);
    a["std_min_grad_norm_sq"] = Number(arm.std_min_grad_norm_sq);
    a["mean_final_loss"] = Number(arm.mean_final_loss);
    a["std_final_loss"] = Number(arm.std_final_loss);
    a["runs"] = ordered_json::array();
    for (const RunOutcome& run : arm.runs) {
      ordered_json r;
      r["seed_index"] = run.seed_index;
      r["seed"] = run.seed;
      r["ok"] = run.ok;
      r["error"] = run.error;
      r["summary"] = SummaryJson(run.log.summary);
      a["runs"].push_back(std::move(r));
      const std::string stem = RunStem(arm.id, run.seed_index);
      WriteFile(root / "runs" / (stem + ".csv"), RunLogCsv(run.log));
      WriteFile(root / "runs" / (stem + ".json"),
                RunSummaryJson(run.log, report.config, arm.achieved));
    }
    doc["arms"].push_back(std::move(a));
    summary += arm.id + "," + FormatDouble(arm.mean_min_grad_norm_sq) + "," +
               FormatDouble(arm.std_min_grad_norm_sq) + "," +
               FormatDouble(arm.achieved ? arm.achieved->epsilon
                                         : std::numeric_limits<double>::quiet_NaN()) +
               "," + FormatDouble(arm.bound_value) + "\n";
  }
  WriteFile(root / "report.json", doc.dump(2) + "\n");
  WriteFile(root / "summary.csv", summary);
}

std::vector<SummaryRow> ReadSummaryCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != "arm_id,mean,std,achieved_eps,bound_value") {
    throw IoError("'" + path + "': unexpected header");
  }
  std::vector<SummaryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) throw IoError("'" + path + "': expected 5 columns");
    rows.push_back({cells[0], ParseCsvDouble(cells[1], path), ParseCsvDouble(cells[2], path),
                    ParseCsvDouble(cells[3], path), ParseCsvDouble(cells[4], path)});
  }
  return rows;
}

}  // namespace adpsgd
