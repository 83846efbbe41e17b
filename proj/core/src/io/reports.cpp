// Copyright 2026 The tinytl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "tinytl/io/reports.hpp"

#include <cstdio>
#include <sstream>

#include "json_fields.hpp"
#include "tinytl/errors.hpp"
#include "tinytl/io/arch_json.hpp"

namespace tinytl::io {

using detail::Json;
using detail::Node;

namespace {

constexpr const char* kMemorySchema = "tinytl.memory/1";
constexpr const char* kCostSchema = "tinytl.cost/1";
constexpr const char* kSweepSchema = "tinytl.sweep/1";
constexpr const char* kTrainSchema = "tinytl.train/1";
constexpr const char* kSearchSchema = "tinytl.search/1";

double mb(std::uint64_t bytes) { return static_cast<double>(bytes) / kBytesPerMB; }

std::string mb_str(std::uint64_t bytes) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", mb(bytes));
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

Json memory_json(const MemoryReport& r) {
  Json rows = Json::array();
  for (const MemoryRow& row : r.rows) {
    rows.push_back(Json{{"layer", row.layer},
                        {"kind", row.kind},
                        {"saved_activation_bytes", row.saved_activation_bytes},
                        {"saved_activation_mb", mb(row.saved_activation_bytes)},
                        {"frozen_param_bytes", row.frozen_param_bytes},
                        {"trainable_param_bytes", row.trainable_param_bytes},
                        {"optimizer_state_bytes", row.optimizer_state_bytes}});
  }
  return Json{{"schema", kMemorySchema},
              {"policy", r.policy},
              {"batch", r.batch},
              {"resolution", r.resolution},
              {"totals",
               Json{{"activation_bytes", r.activation_bytes},
                    {"activation_mb", mb(r.activation_bytes)},
                    {"frozen_param_bytes", r.frozen_param_bytes},
                    {"trainable_param_bytes", r.trainable_param_bytes},
                    {"param_bytes", r.param_bytes()},
                    {"param_mb", mb(r.param_bytes())},
                    {"headline_bytes", r.headline_bytes()},
                    {"headline_mb", mb(r.headline_bytes())},
                    {"optimizer_state_bytes", r.optimizer_state_bytes},
                    {"optimizer_state_mb", mb(r.optimizer_state_bytes)}}},
              {"layers", std::move(rows)}};
}

Json cost_json(const CostReport& r) {
  Json j = memory_json(r.memory);
  j["schema"] = kCostSchema;
  j["inference_mac"] = r.inference_mac;
  j["training_mac"] = r.training_mac;
  return j;
}

void check_schema(const Node& root, const char* schema) {
  const Node s = root.at("schema");
  if (!s.json().is_string() || s.json().get<std::string>() != schema) {
    s.fail(std::string("expected schema ") + schema);
  }
}

std::string as_string(const Node& n) {
  if (!n.json().is_string()) n.fail("expected a string");
  return n.json().get<std::string>();
}

MemoryReport memory_from(const Node& root) {
  MemoryReport r;
  r.policy = as_string(root.at("policy"));
  r.batch = root.at("batch").as_int();
  r.resolution = root.at("resolution").as_int();
  const Node t = root.at("totals");
  r.activation_bytes = t.at("activation_bytes").as_u64();
  r.frozen_param_bytes = t.at("frozen_param_bytes").as_u64();
  r.trainable_param_bytes = t.at("trainable_param_bytes").as_u64();
  r.optimizer_state_bytes = t.at("optimizer_state_bytes").as_u64();
  const Node layers = root.at("layers");
  for (std::size_t i = 0; i < layers.array_size(); ++i) {
    const Node l = layers.at(i);
    MemoryRow row;
    row.layer = as_string(l.at("layer"));
    row.kind = as_string(l.at("kind"));
    row.saved_activation_bytes = l.at("saved_activation_bytes").as_u64();
    row.frozen_param_bytes = l.at("frozen_param_bytes").as_u64();
    row.trainable_param_bytes = l.at("trainable_param_bytes").as_u64();
    row.optimizer_state_bytes = l.at("optimizer_state_bytes").as_u64();
    r.rows.push_back(std::move(row));
  }
  return r;
}

const char* kCostHeader =
    "policy,batch,resolution,inference_mac,training_mac,activation_bytes,activation_mb,"
    "param_bytes,param_mb,headline_bytes,headline_mb,optimizer_state_bytes\n";

void cost_row(std::ostringstream& out, const CostReport& r) {
  const MemoryReport& m = r.memory;
  out << csv_field(m.policy) << ',' << m.batch << ',' << m.resolution << ',' << r.inference_mac
      << ',' << r.training_mac << ',' << m.activation_bytes << ',' << mb_str(m.activation_bytes)
      << ',' << m.param_bytes() << ',' << mb_str(m.param_bytes()) << ',' << m.headline_bytes()
      << ',' << mb_str(m.headline_bytes()) << ',' << m.optimizer_state_bytes << '\n';
}

Json config_json(const SubNetConfig& c) {
  Json stages = Json::array();
  for (const StageChoice& s : c.stages) {
    Json blocks = Json::array();
    for (const BlockChoice& b : s.blocks) {
      blocks.push_back(Json{{"kernel", b.kernel},
                            {"expand", b.expand},
                            {"lite_groups", b.lite_groups},
                            {"lite_kernel", b.lite_kernel}});
    }
    stages.push_back(std::move(blocks));
  }
  return Json{{"resolution", c.resolution}, {"stages", std::move(stages)}, {"str", c.str()}};
}

}  // namespace

ReportFormat format_for(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? ReportFormat::kCsv : ReportFormat::kJson;
}

std::string to_json(const MemoryReport& report) { return memory_json(report).dump(2) + "\n"; }

std::string to_json(const CostReport& report) { return cost_json(report).dump(2) + "\n"; }

std::string to_json(const std::vector<CostReport>& sweep) {
  Json rows = Json::array();
  for (const CostReport& r : sweep) {
    Json j = cost_json(r);
    j.erase("schema");
    rows.push_back(std::move(j));
  }
  return Json{{"schema", kSweepSchema}, {"reports", std::move(rows)}}.dump(2) + "\n";
}

std::string to_json(const TrainReport& r) {
  const Json j{{"schema", kTrainSchema},
               {"policy", r.policy},
               {"epochs", r.epochs},
               {"batch", r.batch},
               {"lr0", r.lr0},
               {"seed", r.seed},
               {"steps", r.steps},
               {"loss_curve", r.loss_curve},
               {"final_loss", r.final_loss},
               {"train_acc", r.train_acc},
               {"final_acc", r.final_acc},
               {"peak_saved_bytes", r.peak_saved_bytes},
               {"peak_saved_mb", mb(r.peak_saved_bytes)},
               {"analytic_activation_bytes", r.analytic_activation_bytes},
               {"analytic_activation_mb", mb(r.analytic_activation_bytes)},
               {"trainable_params", r.trainable_params},
               {"frozen_params", r.frozen_params}};
  return j.dump(2) + "\n";
}

std::string to_json(const PipelineResult& result, const ElasticSpace& space) {
  Json pairs = Json::array();
  for (const AccuracyPair& p : result.pairs) {
    pairs.push_back(Json{{"config", p.config.str()}, {"accuracy", p.accuracy}});
  }
  Json reranked = Json::array();
  for (const auto& [c, score] : result.reranked) {
    reranked.push_back(Json{{"config", c.str()}, {"score", score}});
  }
  Json phases = Json::array();
  for (const PhaseCost& p : result.cost.phases) {
    phases.push_back(Json{{"phase", p.phase},
                          {"per_sample_mac", p.per_sample_mac},
                          {"samples", p.samples},
                          {"fraction", p.fraction},
                          {"passes", p.passes},
                          {"total_mac", p.total_mac}});
  }
  const Json j{{"schema", kSearchSchema},
               {"best", config_json(result.best)},
               {"best_arch", Json::parse(arch_to_json(subnet_arch(space, result.best)))},
               {"predicted_best", config_json(result.search.best)},
               {"predicted_best_score", result.search.best_score},
               {"reranked", std::move(reranked)},
               {"phase1_loss", result.phase1_loss},
               {"final", Json::parse(to_json(result.final_report))},
               {"cost",
                Json{{"phases", std::move(phases)},
                     {"total_mac", result.cost.total_mac},
                     {"phase1_peak_saved_bytes", result.cost.phase1_peak_saved_bytes},
                     {"phase2_peak_saved_bytes", result.cost.phase2_peak_saved_bytes},
                     {"phase3_peak_saved_bytes", result.cost.phase3_peak_saved_bytes}}},
               {"pairs", std::move(pairs)}};
  return j.dump(2) + "\n";
}

std::string to_csv(const MemoryReport& report) {
  std::ostringstream out;
  out << "layer,kind,saved_activation_bytes,saved_activation_mb,frozen_param_bytes,"
         "trainable_param_bytes,optimizer_state_bytes\n";
  for (const MemoryRow& r : report.rows) {
    out << csv_field(r.layer) << ',' << csv_field(r.kind) << ',' << r.saved_activation_bytes << ','
        << mb_str(r.saved_activation_bytes) << ',' << r.frozen_param_bytes << ','
        << r.trainable_param_bytes << ',' << r.optimizer_state_bytes << '\n';
  }
  return out.str();
}

std::string to_csv(const CostReport& report) {
  std::ostringstream out;
  out << kCostHeader;
  cost_row(out, report);
  return out.str();
}

std::string to_csv(const std::vector<CostReport>& sweep) {
  std::ostringstream out;
  out << kCostHeader;
  for (const CostReport& r : sweep) cost_row(out, r);
  return out.str();
}

std::string to_csv(const TrainReport& report) {
  std::ostringstream out;
  out << "epoch,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < report.loss_curve.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", report.loss_curve[i]);
    out << i << ',' << buf << '\n';
  }
  return out.str();
}

MemoryReport memory_report_from_json(const std::string& text) {
  const Json j = detail::parse_text(text, "<memory report>");
  const Node root(j, "<memory report>", "");
  check_schema(root, kMemorySchema);
  return memory_from(root);
}

CostReport cost_report_from_json(const std::string& text) {
  const Json j = detail::parse_text(text, "<cost report>");
  const Node root(j, "<cost report>", "");
  check_schema(root, kCostSchema);
  CostReport r;
  r.memory = memory_from(root);
  r.inference_mac = root.at("inference_mac").as_u64();
  r.training_mac = root.at("training_mac").as_u64();
  return r;
}

TrainReport train_report_from_json(const std::string& text) {
  const Json j = detail::parse_text(text, "<train report>");
  const Node root(j, "<train report>", "");
  check_schema(root, kTrainSchema);
  TrainReport r;
  r.policy = as_string(root.at("policy"));
  r.epochs = root.at("epochs").as_int();
  r.batch = root.at("batch").as_int();
  r.lr0 = root.at("lr0").as_double();
  r.seed = root.at("seed").as_u64();
  r.steps = static_cast<std::int64_t>(root.at("steps").as_u64());
  const Node curve = root.at("loss_curve");
  for (std::size_t i = 0; i < curve.array_size(); ++i) r.loss_curve.push_back(curve.at(i).as_double());
  r.final_loss = root.at("final_loss").as_double();
  r.train_acc = root.at("train_acc").as_double();
  r.final_acc = root.at("final_acc").as_double();
  r.peak_saved_bytes = root.at("peak_saved_bytes").as_u64();
  r.analytic_activation_bytes = root.at("analytic_activation_bytes").as_u64();
  r.trainable_params = static_cast<std::int64_t>(root.at("trainable_params").as_u64());
  r.frozen_params = static_cast<std::int64_t>(root.at("frozen_params").as_u64());
  return r;
}

template <typename Report>
void emit_report(const Report& report, ReportFormat format, const std::filesystem::path& path) {
  write_text(path, format == ReportFormat::kCsv ? to_csv(report) : to_json(report));
}

template void emit_report(const MemoryReport&, ReportFormat, const std::filesystem::path&);
template void emit_report(const CostReport&, ReportFormat, const std::filesystem::path&);
template void emit_report(const std::vector<CostReport>&, ReportFormat,
                          const std::filesystem::path&);
template void emit_report(const TrainReport&, ReportFormat, const std::filesystem::path&);

}  // namespace tinytl::io
