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

#include <cstdlib>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "tinytl/arch.hpp"
#include "tinytl/io/arch_json.hpp"
#include "tinytl/io/dataset_file.hpp"
#include "tinytl/io/reports.hpp"
#include "tinytl/memory_model.hpp"
#include "tinytl/policy.hpp"

namespace tinytl {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::json;

const std::string kArch = std::string(TINYTL_CONFIG_DIR) + "/reference-tiny.json";

fs::path work_dir() {
  const fs::path dir = fs::temp_directory_path() / "tinytl_cli_test";
  fs::create_directories(dir);
  return dir;
}

std::string path(const std::string& name) { return (work_dir() / name).string(); }

int run(const std::string& args) {
  const std::string cmd = std::string(TINYTL_CLI) + " " + args + " 2>" + path("stderr.txt");
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Json read_json(const std::string& p) { return Json::parse(io::read_text(p)); }

TEST(Cli, SynthIsByteReproducible) {
  ASSERT_EQ(run("synth --classes 4 --per-class 4 --size 32 --seed 3 --out " + path("a.ttld")), 0);
  ASSERT_EQ(run("synth --classes 4 --per-class 4 --size 32 --seed 3 --out " + path("b.ttld")), 0);
  EXPECT_EQ(io::read_text(path("a.ttld")), io::read_text(path("b.ttld")));
  const Dataset d = io::load_dataset(path("a.ttld"));
  EXPECT_EQ(d.size(), 16u);
  EXPECT_EQ(d.n_classes, 4);
}

TEST(Cli, AnalyzeMatchesLibrary) {
  ASSERT_EQ(run("analyze --arch " + kArch + " --policy tinytl-lb --batch 8 --resolution 224 --out " +
                path("an.json")),
            0);
  const CostReport expect =
      cost_report(io::load_arch(kArch), FineTunePolicy(PolicyKind::kTinyTLLB), 8, 224);
  EXPECT_EQ(io::read_text(path("an.json")), io::to_json(expect));
  ASSERT_EQ(run("analyze --arch " + kArch + " --policy ft-last --batch 1 --resolution 128 --out " +
                path("an.csv")),
            0);
  EXPECT_EQ(io::read_text(path("an.csv")).rfind("policy,batch,resolution", 0), 0u);
}

TEST(Cli, TrainPeakEqualsAnalyze) {
  ASSERT_EQ(run("synth --classes 10 --per-class 1 --size 32 --seed 4 --out " + path("t.ttld")), 0);
  for (const std::string policy : {"tinytl-lb", "ft-last"}) {
    ASSERT_EQ(run("train --arch " + kArch + " --policy " + policy + " --data " + path("t.ttld") +
                  " --epochs 1 --batch 2 --lr 1e-3 --seed 5 --out " + path("train.json")),
              0);
    ASSERT_EQ(run("analyze --arch " + kArch + " --policy " + policy +
                  " --batch 2 --resolution 224 --out " + path("an2.json")),
              0);
    const Json t = read_json(path("train.json"));
    const Json a = read_json(path("an2.json"));
    EXPECT_EQ(t["peak_saved_bytes"].get<std::uint64_t>(),
              a["totals"]["activation_bytes"].get<std::uint64_t>())
        << policy;
  }
}

TEST(Cli, TrainIsReproducible) {
  ASSERT_EQ(run("synth --classes 10 --per-class 1 --size 32 --seed 4 --out " + path("r.ttld")), 0);
  const std::string args = "train --arch " + kArch + " --policy tinytl-b --data " + path("r.ttld") +
                           " --epochs 2 --batch 4 --lr 1e-3 --seed 9 --out ";
  ASSERT_EQ(run(args + path("r1.json")), 0);
  ASSERT_EQ(run(args + path("r2.json")), 0);
  EXPECT_EQ(io::read_text(path("r1.json")), io::read_text(path("r2.json")));
}

TEST(Cli, SweepWritesOneRowPerCombination) {
  ASSERT_EQ(run("sweep --arch " + kArch +
                " --policies ft-full,tinytl-lb --resolutions 128,160,192,224 --out " +
                path("sweep.csv")),
            0);
  const std::string csv = io::read_text(path("sweep.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 9);
}

TEST(Cli, GradcheckPasses) {
  EXPECT_EQ(run("gradcheck --arch " + kArch + " --policy tinytl-b --eps 1e-3 --seed 2 --samples 1"),
            0);
}

TEST(Cli, SearchEmitsWinner) {
  ASSERT_EQ(run("synth --classes 4 --per-class 5 --size 32 --seed 6 --out " + path("s.ttld")), 0);
  ASSERT_EQ(run("search --space " + std::string(TINYTL_CONFIG_DIR) + "/space-small.json --data " +
                path("s.ttld") +
                " --pairs 4 --population 4 --generations 1 --seed 1 --phase1-epochs 1"
                " --final-epochs 1 --out " + path("search.json")),
            0);
  const Json j = read_json(path("search.json"));
  EXPECT_TRUE(j.contains("best"));
  EXPECT_EQ(j["schema"], "tinytl.search/1");
}

TEST(Cli, BadInputsFail) {
  EXPECT_NE(run("analyze --arch " + kArch + " --policy tinytl-x"), 0);
  EXPECT_NE(run("analyze --arch " + path("missing.json")), 0);
  EXPECT_NE(run("frobnicate"), 0);
  io::write_text(path("bad.json"), "{\"version\": 1}");
  EXPECT_EQ(run("analyze --arch " + path("bad.json")), 2);
  EXPECT_NE(io::read_text(path("stderr.txt")).find("stem"), std::string::npos);
}

}  // namespace
}  // namespace tinytl
