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


#ifndef TINYTL_IO_REPORTS_HPP_
#define TINYTL_IO_REPORTS_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "tinytl/memory_model.hpp"
#include "tinytl/pipeline.hpp"
#include "tinytl/train.hpp"

namespace tinytl::io {

enum class ReportFormat { kJson, kCsv };

// ".csv" selects CSV, anything else JSON.
ReportFormat format_for(const std::filesystem::path& path);

inline constexpr double kBytesPerMB = 1024.0 * 1024.0;

// JSON documents carry a "schema" field of the form "tinytl.<kind>/<n>".
// Byte counts are exact integers; every "_mb" field is bytes / 2^20.
std::string to_json(const MemoryReport& report);
std::string to_json(const CostReport& report);
std::string to_json(const TrainReport& report);
std::string to_json(const std::vector<CostReport>& sweep);
std::string to_json(const PipelineResult& result, const ElasticSpace& space);

// CSV columns:
//   memory: layer,kind,saved_activation_bytes,saved_activation_mb,
//           frozen_param_bytes,trainable_param_bytes,optimizer_state_bytes
//   cost / sweep: policy,batch,resolution,inference_mac,training_mac,
//           activation_bytes,activation_mb,param_bytes,param_mb,
//           headline_bytes,headline_mb,optimizer_state_bytes
//   train: epoch,loss
std::string to_csv(const MemoryReport& report);
std::string to_csv(const CostReport& report);
std::string to_csv(const std::vector<CostReport>& sweep);
std::string to_csv(const TrainReport& report);

MemoryReport memory_report_from_json(const std::string& text);
CostReport cost_report_from_json(const std::string& text);
TrainReport train_report_from_json(const std::string& text);

// Throws IoError when the path cannot be written.
template <typename Report>
void emit_report(const Report& report, ReportFormat format, const std::filesystem::path& path);

}  // namespace tinytl::io

#endif  // TINYTL_IO_REPORTS_HPP_
