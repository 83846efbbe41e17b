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


#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "tinytl/arch.hpp"
#include "tinytl/errors.hpp"
#include "tinytl/io/arch_json.hpp"
#include "tinytl/io/dataset_file.hpp"
#include "tinytl/io/reports.hpp"
#include "tinytl/memory_model.hpp"
#include "tinytl/model.hpp"
#include "tinytl/train.hpp"

namespace tinytl {
namespace {

namespace fs = std::filesystem;

std::string config(const std::string& name) { return std::string(TINYTL_CONFIG_DIR) + "/" + name; }

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "tinytl_io_test";
  fs::create_directories(dir);
  return dir / name;
}

std::string expect_spec_error(const std::string& text) {
  try {
    io::parse_arch(text, "a.json");
  } catch (const SpecError& e) {
    return e.what();
  }
  ADD_FAILURE() << "no error for input";
  return {};
}

io::SynthSpec four_class(std::uint64_t seed, int per_class = 64) {
  io::SynthSpec s;
  s.per_class = per_class;
  s.noise = 0.05;
  s.seed = seed;
  return s;
}

// Softmax regression on per-channel image means, trained by full-batch
// gradient descent.
double pooled_linear_probe(const Dataset& train, const Dataset& test) {
  auto features = [](const Dataset& d) {
    std::vector<std::vector<double>> f(d.size(), std::vector<double>(d.channels + 1, 1.0));
    const std::size_t hw = static_cast<std::size_t>(d.height) * d.width;
    for (std::size_t i = 0; i < d.size(); ++i) {
      for (int c = 0; c < d.channels; ++c) {
        double s = 0;
        for (std::size_t p = 0; p < hw; ++p) s += d.images[i * d.image_numel() + c * hw + p];
        f[i][c] = (s / hw / 255.0 - 0.5) / 0.25;
      }
    }
    return f;
  };
  const auto xtr = features(train);
  const auto xte = features(test);
  const int k = train.n_classes;
  const std::size_t dim = xtr[0].size();
  std::vector<double> w(k * dim, 0.0);
  auto logits = [&](const std::vector<double>& x) {
    std::vector<double> z(k, 0.0);
    for (int c = 0; c < k; ++c) {
      for (std::size_t j = 0; j < dim; ++j) z[c] += w[c * dim + j] * x[j];
    }
    return z;
  };
  for (int it = 0; it < 2000; ++it) {
    std::vector<double> g(w.size(), 0.0);
    for (std::size_t i = 0; i < xtr.size(); ++i) {
      auto z = logits(xtr[i]);
      const double m = *std::max_element(z.begin(), z.end());
      double s = 0;
      for (double& v : z) s += (v = std::exp(v - m));
      for (int c = 0; c < k; ++c) {
        const double p = z[c] / s - (c == train.labels[i] ? 1.0 : 0.0);
        for (std::size_t j = 0; j < dim; ++j) g[c * dim + j] += p * xtr[i][j] / xtr.size();
      }
    }
    for (std::size_t j = 0; j < w.size(); ++j) w[j] -= 0.5 * g[j];
  }
  int correct = 0;
  for (std::size_t i = 0; i < xte.size(); ++i) {
    const auto z = logits(xte[i]);
    correct += (std::max_element(z.begin(), z.end()) - z.begin()) == test.labels[i];
  }
  return static_cast<double>(correct) / xte.size();
}

TEST(ArchJson, BundledReferenceFixture) {
  const ArchitectureSpec a = io::load_arch(config("reference-tiny.json"));
  ASSERT_EQ(a.stages.size(), 5u);
  for (const auto& st : a.stages) EXPECT_EQ(st.blocks.size(), 2u);
  EXPECT_EQ(a, reference_tiny_arch(a.n_classes));
}

TEST(ArchJson, RoundTrip) {
  const ArchitectureSpec a = io::load_arch(config("reference-tiny.json"));
  const fs::path p = temp_path("arch.json");
  io::save_arch(a, p);
  EXPECT_EQ(io::load_arch(p), a);
  EXPECT_EQ(io::arch_to_json(io::parse_arch(io::arch_to_json(a))), io::arch_to_json(a));
}

TEST(ArchJson, ChannelMismatchNamesBothBlocks) {
  auto j = nlohmann::json::parse(io::read_text(config("reference-tiny.json")));
  j["stages"][2]["blocks"][0]["in_ch"] = 20;
  const std::string msg = expect_spec_error(j.dump());
  EXPECT_NE(msg.find("stages[1].blocks[1]"), std::string::npos) << msg;
  EXPECT_NE(msg.find("stages[2].blocks[0]"), std::string::npos) << msg;
}

TEST(ArchJson, DiagnosticsCarryFieldPath) {
  auto j = nlohmann::json::parse(io::read_text(config("reference-tiny.json")));
  j["stages"][3]["blocks"][1]["lite"]["kernel"] = "five";
  EXPECT_NE(expect_spec_error(j.dump()).find("stages[3].blocks[1].lite.kernel"), std::string::npos);
  j = nlohmann::json::parse(io::read_text(config("reference-tiny.json")));
  j["stem"].erase("stride");
  EXPECT_NE(expect_spec_error(j.dump()).find("stem.stride"), std::string::npos);
  EXPECT_NE(expect_spec_error("{\"version\": 1,").find("a.json:"), std::string::npos);
  j = nlohmann::json::parse(io::read_text(config("reference-tiny.json")));
  j["version"] = 7;
  EXPECT_NE(expect_spec_error(j.dump()).find("version"), std::string::npos);
  EXPECT_THROW(io::load_arch(temp_path("missing.json")), IoError);
}

TEST(SpaceJson, RoundTrip) {
  for (const char* name : {"space-default.json", "space-small.json"}) {
    const io::SpaceFile f = io::load_space(config(name));
    const io::SpaceFile g = io::parse_space(io::space_to_json(f));
    EXPECT_EQ(g.space.stages, f.space.stages);
    EXPECT_EQ(g.space.widths, f.space.widths);
    EXPECT_EQ(g.space.resolutions, f.space.resolutions);
    EXPECT_EQ(g.search.population, f.search.population);
    EXPECT_EQ(io::space_to_json(g), io::space_to_json(f));
  }
}

TEST(DatasetFile, RoundTripAndLayout) {
  const Dataset d = io::synth_dataset(four_class(3, 4));
  const auto bytes = io::encode_dataset(d);
  EXPECT_EQ(bytes.size(), io::kDatasetHeaderBytes + d.size() * d.image_numel() + 2 * d.size());
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "TTLD");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[8], 16);  // count, little-endian
  const Dataset e = io::decode_dataset(bytes);
  EXPECT_EQ(e.images, d.images);
  EXPECT_EQ(e.labels, d.labels);
  EXPECT_EQ(e.n_classes, 4);
  const fs::path p = temp_path("d.ttld");
  io::save_dataset(d, p);
  EXPECT_EQ(io::load_dataset(p).images, d.images);
}

TEST(DatasetFile, CorruptInputsRejected) {
  const auto bytes = io::encode_dataset(io::synth_dataset(four_class(3, 4)));
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(io::decode_dataset(truncated), IoError);
  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(io::decode_dataset(magic), IoError);
  auto label = bytes;
  label[label.size() - 2] = 9;
  EXPECT_ANY_THROW(io::decode_dataset(label));
}

TEST(Synth, DeterministicAndBalanced) {
  for (auto task : {io::SynthTask::kOrientation, io::SynthTask::kPeriod}) {
    auto s = four_class(5, 16);
    s.task = task;
    EXPECT_EQ(io::encode_dataset(io::synth_dataset(s)), io::encode_dataset(io::synth_dataset(s)));
    for (std::size_t n : io::synth_dataset(s).class_histogram()) EXPECT_EQ(n, 16u);
    auto t = s;
    t.seed = 6;
    EXPECT_NE(io::synth_dataset(s).images, io::synth_dataset(t).images);
  }
  auto small = four_class(1, 2);
  small.size = 8;
  EXPECT_THROW(io::synth_dataset(small), SpecError);
}

TEST(Synth, PooledPixelProbeNearChance) {
  for (auto task : {io::SynthTask::kOrientation, io::SynthTask::kPeriod}) {
    auto s = four_class(1);
    s.task = task;
    auto t = s;
    t.seed = 2;
    const double acc = pooled_linear_probe(io::synth_dataset(s), io::synth_dataset(t));
    EXPECT_LT(acc, 0.6);
  }
}

TEST(Synth, SmallConvNetLearnsTask) {
  const Dataset train_set = io::synth_dataset(four_class(1, 128));
  const Dataset eval_set = io::synth_dataset(four_class(2, 32));
  Model m = build_backbone<float>(reference_tiny_arch(4), 4, InitStrategy::kRandomZeroScale, 1);
  TrainConfig cfg;
  cfg.epochs = 15;
  cfg.lr0 = 1e-2;
  cfg.check_memory = false;
  cfg.forward.lite = false;
  const TrainReport r = train(m, train_set, FineTunePolicy(PolicyKind::kFTFull), cfg, &eval_set);
  EXPECT_GT(r.final_acc, 0.9);
}

TEST(Reports, EmptyMemoryReportIsHeaderOnlyCsv) {
  const std::string csv = io::to_csv(MemoryReport{});
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1);
  EXPECT_EQ(csv.rfind("layer,kind,", 0), 0u);
}

TEST(Reports, JsonRoundTrip) {
  const auto arch = reference_tiny_arch(4);
  const MemoryReport m = model_footprint(arch, FineTunePolicy(PolicyKind::kTinyTLLB), 8, 224);
  const MemoryReport m2 = io::memory_report_from_json(io::to_json(m));
  EXPECT_EQ(io::to_json(m2), io::to_json(m));
  EXPECT_EQ(m2.activation_bytes, m.activation_bytes);
  ASSERT_EQ(m2.rows.size(), m.rows.size());
  EXPECT_EQ(m2.rows[3].layer, m.rows[3].layer);

  const CostReport c = cost_report(arch, FineTunePolicy(PolicyKind::kFTFull), 1, 128);
  const CostReport c2 = io::cost_report_from_json(io::to_json(c));
  EXPECT_EQ(c2.training_mac, c.training_mac);
  EXPECT_EQ(io::to_json(c2), io::to_json(c));

  TrainReport t;
  t.policy = "tinytl-b";
  t.loss_curve = {1.5, 0.25, 1.0 / 3.0};
  t.final_acc = 0.625;
  t.peak_saved_bytes = 12345;
  const TrainReport t2 = io::train_report_from_json(io::to_json(t));
  EXPECT_EQ(t2.loss_curve, t.loss_curve);
  EXPECT_EQ(t2.peak_saved_bytes, t.peak_saved_bytes);
  EXPECT_EQ(io::to_json(t2), io::to_json(t));
  EXPECT_THROW(io::cost_report_from_json(io::to_json(m)), SpecError);
}

TEST(Reports, JsonCarriesBytesAndMegabytes) {
  const MemoryReport m = model_footprint(reference_tiny_arch(4), FineTunePolicy(PolicyKind::kFTLast), 8, 224);
  const auto j = nlohmann::json::parse(io::to_json(m));
  EXPECT_TRUE(j.contains("schema"));
  EXPECT_EQ(j["totals"]["activation_bytes"].get<std::uint64_t>(), m.activation_bytes);
  EXPECT_DOUBLE_EQ(j["totals"]["activation_mb"].get<double>(), m.activation_bytes / io::kBytesPerMB);
}

TEST(Reports, EmitWritesFilesAndRejectsBadPath) {
  const CostReport c = cost_report(reference_tiny_arch(4), FineTunePolicy(PolicyKind::kFTFull), 1, 128);
  const fs::path p = temp_path("cost.csv");
  EXPECT_EQ(io::format_for(p), io::ReportFormat::kCsv);
  EXPECT_EQ(io::format_for(temp_path("cost.json")), io::ReportFormat::kJson);
  io::emit_report(c, io::format_for(p), p);
  EXPECT_EQ(io::read_text(p), io::to_csv(c));
  EXPECT_THROW(io::emit_report(c, io::ReportFormat::kJson, temp_path("nope") / "x" / "c.json"),
               IoError);
}

TEST(Reports, ResolutionSweepIsMonotone) {
  const auto arch = reference_tiny_arch(4);
  for (const auto& policy : named_policies()) {
    std::vector<CostReport> sweep;
    for (int r : {128, 160, 192, 224}) sweep.push_back(cost_report(arch, policy, 8, r));
    for (std::size_t i = 1; i < sweep.size(); ++i) {
      EXPECT_GT(sweep[i].memory.activation_bytes, sweep[i - 1].memory.activation_bytes);
      EXPECT_GT(sweep[i].training_mac, sweep[i - 1].training_mac);
      EXPECT_EQ(sweep[i].memory.param_bytes(), sweep[0].memory.param_bytes());
    }
    const std::string csv = io::to_csv(sweep);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  }
}

}  // namespace
}  // namespace tinytl
