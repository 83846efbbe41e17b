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

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "tinytl/elastic.hpp"
#include "tinytl/errors.hpp"
#include "tinytl/evolution.hpp"
#include "tinytl/io/arch_json.hpp"
#include "tinytl/io/dataset_file.hpp"
#include "tinytl/memory_model.hpp"
#include "tinytl/pipeline.hpp"
#include "tinytl/predictor.hpp"

namespace tinytl {
namespace {

using testing::bit_equal;

io::SpaceFile small_space() {
  return io::load_space(std::string(TINYTL_CONFIG_DIR) + "/space-small.json");
}

ElasticSpace tiny_default_space() {
  ElasticSpace s;
  s.n_classes = 4;
  s.resolutions = {32};
  return s;
}

Dataset synth(int per_class, std::uint64_t seed) {
  io::SynthSpec s;
  s.per_class = per_class;
  s.seed = seed;
  return io::synth_dataset(s);
}

// Deterministic score that is linear in the one-hot encoding.
ScoreFn linear_oracle(const ElasticSpace& space, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> w(encoding_width(space));
  for (double& v : w) v = u(rng);
  return [w, space](const SubNetConfig& c) {
    const auto e = encode_arch(c, space);
    double s = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) s += w[i] * e[i];
    return s;
  };
}

// Standalone weights for a sub-network: leading slices everywhere except
// the spatial dims of 4-D conv weights, which take the centered window.
Model standalone_from_slices(const Supernet& sn, const SubNetConfig& c) {
  const ArchitectureSpec arch = subnet_arch(sn.space, c);
  Model m = build_backbone<float>(arch, sn.space.n_classes, InitStrategy::kRandomZeroScale, 99);
  for (const auto& p : m.parameters()) {
    const auto src = sn.model.find(p->name);
    EXPECT_NE(src, nullptr) << p->name;
    if (src == nullptr) continue;
    const Shape& to = p->value.shape();
    const Shape& from = src->value.shape();
    const std::size_t rank = to.rank();
    std::vector<std::int64_t> offset(rank, 0);
    for (std::size_t d = 0; d < rank; ++d) {
      if (rank == 4 && d >= 2) offset[d] = (from[d] - to[d]) / 2;
    }
    std::vector<std::int64_t> idx(rank, 0);
    for (std::size_t flat = 0; flat < p->value.numel(); ++flat) {
      std::size_t rem = flat;
      for (std::size_t d = rank; d-- > 0;) {
        idx[d] = static_cast<std::int64_t>(rem % static_cast<std::size_t>(to[d]));
        rem /= static_cast<std::size_t>(to[d]);
      }
      std::size_t s = 0;
      for (std::size_t d = 0; d < rank; ++d) {
        s = s * static_cast<std::size_t>(from[d]) + static_cast<std::size_t>(idx[d] + offset[d]);
      }
      p->value[flat] = src->value[s];
    }
  }
  return m;
}

TEST(SampleSubnet, DeterministicAndWithinSpace) {
  const ElasticSpace s = tiny_default_space();
  EXPECT_EQ(sample_subnet(s, 5), sample_subnet(s, 5));
  for (std::uint64_t seed = 0; seed < 50; ++seed) EXPECT_NO_THROW(validate_config(sample_subnet(s, seed), s));
}

TEST(SampleSubnet, DepthUniform) {
  const ElasticSpace s = tiny_default_space();
  std::mt19937_64 rng(17);
  std::vector<int> twos(kNumStages, 0);
  constexpr int kN = 10000;
  for (int i = 0; i < kN; ++i) {
    const SubNetConfig c = sample_subnet(s, rng);
    for (int st = 0; st < kNumStages; ++st) twos[st] += c.stages[st].depth() == 2;
  }
  for (int st = 0; st < kNumStages; ++st) EXPECT_NEAR(twos[st] / double(kN), 1.0 / 3.0, 0.02);
}

TEST(SampleSubnet, SingletonSpace) {
  ElasticSpace s = tiny_default_space();
  for (auto& o : s.stages) o = StageOptions{{2}, {3}, {4}, {2}, {3}};
  EXPECT_EQ(s.size(), 1u);
  EXPECT_EQ(sample_subnet(s, 1), smallest_subnet(s));
  EXPECT_EQ(sample_subnet(s, 2), largest_subnet(s));
}

TEST(ElasticSpace, SizeAndValidation) {
  EXPECT_EQ(small_space().space.size(), 128u);
  EXPECT_EQ(enumerate_subnets(small_space().space).size(), 128u);
  ElasticSpace bad = tiny_default_space();
  bad.stages[1].kernel.clear();
  EXPECT_THROW(bad.validate(), SpecError);
  SubNetConfig c = largest_subnet(tiny_default_space());
  c.stages[0].blocks[0].kernel = 9;
  EXPECT_THROW(validate_config(c, tiny_default_space()), SpecError);
}

TEST(SubnetExtract, MaximalConfigIsTheSupernet) {
  const Supernet sn = build_supernet(tiny_default_space(), InitStrategy::kRandomZeroScale, 3);
  const Model sub = subnet_extract(sn, largest_subnet(sn.space));
  const Tensor x = testing::random_tensor<float>(Shape{2, 3, 32, 32}, 4);
  EXPECT_TRUE(bit_equal(sub.forward(x, nullptr).value, sn.model.forward(x, nullptr).value));
  EXPECT_EQ(sub.parameter_count(), sn.model.parameter_count());
}

TEST(SubnetExtract, SlicedForwardMatchesStandalone) {
  ElasticSpace space = tiny_default_space();
  const Supernet sn = build_supernet(space, InitStrategy::kRandomZeroScale, 3);
  // Give the lite branches nonzero output so their slices matter.
  for (const auto& p : sn.model.parameters()) {
    if (p->name.find(".lite.gn.scale") != std::string::npos) p->value.fill(0.5f);
  }
  const Tensor x = testing::random_tensor<float>(Shape{2, 3, 32, 32}, 4);
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    SubNetConfig c = sample_subnet(space, seed);
    for (auto& st : c.stages) {
      for (auto& b : st.blocks) b.lite_groups = 2;
    }
    if (seed == 0) {
      for (auto& st : c.stages) {
        for (auto& b : st.blocks) b.kernel = 3;
      }
    }
    const Model sub = subnet_extract(sn, c);
    const Model ref = standalone_from_slices(sn, c);
    EXPECT_LE(testing::max_abs_diff(sub.forward(x, nullptr).value, ref.forward(x, nullptr).value),
              1e-5)
        << c.str();
  }
}

TEST(SubnetExtract, InactiveBlocksAreVacuous) {
  const Supernet sn = build_supernet(tiny_default_space(), InitStrategy::kRandomZeroScale, 3);
  const SubNetConfig c = smallest_subnet(sn.space);
  const Model sub = subnet_extract(sn, c);
  const Tensor x = testing::random_tensor<float>(Shape{1, 3, 32, 32}, 8);
  const Tensor before = sub.forward(x, nullptr).value;
  for (const auto& p : sn.model.parameters()) {
    if (p->name.rfind("s1.b3.", 0) == 0 || p->name.rfind("s2.b2.", 0) == 0) p->value.fill(3.0f);
  }
  EXPECT_TRUE(bit_equal(sub.forward(x, nullptr).value, before));
  EXPECT_EQ(subnet_extract(sn, c).parameter_count(), sub.parameter_count());
}

TEST(SubnetExtract, SharesWeightsWithSupernet) {
  const Supernet sn = build_supernet(tiny_default_space(), InitStrategy::kRandomZeroScale, 3);
  const Model sub = subnet_extract(sn, sample_subnet(sn.space, 1));
  const Tensor x = testing::random_tensor<float>(Shape{1, 3, 32, 32}, 8);
  const Tensor before = sub.forward(x, nullptr).value;
  auto w = sn.model.find("s0.b0.dw.conv.weight");
  ASSERT_NE(w, nullptr);
  for (auto& v : w->value.data()) v *= 2.0f;
  EXPECT_FALSE(bit_equal(sub.forward(x, nullptr).value, before));
  EXPECT_EQ(sub.find("s0.b0.dw.conv.weight"), w);
}

TEST(SubnetExtract, RejectsConfigOutsideSpace) {
  const Supernet sn = build_supernet(tiny_default_space(), InitStrategy::kRandomZeroScale, 3);
  SubNetConfig c = largest_subnet(sn.space);
  c.stages[2].blocks.emplace_back();
  EXPECT_THROW(subnet_extract(sn, c), SpecError);
}

TEST(EncodeArch, MinimalConfigLayout) {
  const ElasticSpace s = tiny_default_space();
  EXPECT_EQ(encoding_width(s), static_cast<std::size_t>(kNumStages * (3 + 4 * 10) + 1));
  const auto e = encode_arch(smallest_subnet(s), s);
  for (int st = 0; st < kNumStages; ++st) {
    const std::size_t base = static_cast<std::size_t>(st) * 43;
    EXPECT_EQ(e[base], 1.0f);
    EXPECT_EQ(e[base + 1], 0.0f);
    EXPECT_EQ(e[base + 2], 0.0f);
    for (std::size_t i = base + 3 + 2 * 10; i < base + 43; ++i) EXPECT_EQ(e[i], 0.0f);
    for (std::size_t slot = 0; slot < 2; ++slot) {
      float sum = 0;
      for (std::size_t i = 0; i < 10; ++i) sum += e[base + 3 + slot * 10 + i];
      EXPECT_EQ(sum, 4.0f);
    }
  }
}

TEST(EncodeArch, RoundTripAndInjective) {
  const ElasticSpace s = small_space().space;
  std::set<std::vector<float>> seen;
  for (const SubNetConfig& c : enumerate_subnets(s)) {
    const auto e = encode_arch(c, s);
    EXPECT_EQ(decode_arch(e, s), c);
    seen.insert(e);
  }
  EXPECT_EQ(seen.size(), 128u);
  const ElasticSpace d = tiny_default_space();
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const SubNetConfig c = sample_subnet(d, seed);
    EXPECT_EQ(decode_arch(encode_arch(c, d), d), c);
  }
}

TEST(CollectPairs, EmptyDeterministicForwardOnly) {
  const Supernet sn = build_supernet(small_space().space, InitStrategy::kRandomZeroScale, 3);
  const Dataset val = synth(4, 5);
  EXPECT_TRUE(collect_pairs(sn, val, 0, 1).empty());
  std::uint64_t peak = 1;
  const auto a = collect_pairs(sn, val, 6, 7, {}, &peak);
  const auto b = collect_pairs(sn, val, 6, 7);
  EXPECT_EQ(peak, 0u);
  ASSERT_EQ(a.size(), 6u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].config, b[i].config);
    EXPECT_EQ(a[i].accuracy, b[i].accuracy);
    EXPECT_GE(a[i].accuracy, 0.0);
    EXPECT_LE(a[i].accuracy, 1.0);
  }
}

TEST(Predictor, ClosedFormSizeAndMac) {
  const ElasticSpace s = tiny_default_space();
  const AccuracyPredictor p(encoding_width(s), 400, 1);
  const auto w = static_cast<std::int64_t>(encoding_width(s));
  EXPECT_EQ(p.parameter_count(), w * 400 + 400 + 400 * 400 + 400 + 400 + 1);
  EXPECT_EQ(p.parameter_count(), AccuracyPredictor::closed_form_parameter_count(w, 400));
  EXPECT_EQ(p.inference_mac(), w * 400 + 400 * 400 + 400);
  EXPECT_LT(p.inference_mac(), 1000000);
}

TEST(Predictor, ConstantTargetsFitConstant) {
  const ElasticSpace s = small_space().space;
  std::vector<AccuracyPair> pairs;
  for (const auto& c : enumerate_subnets(s)) pairs.push_back({c, 0.625});
  PredictorConfig cfg;
  cfg.epochs = 20;
  const AccuracyPredictor p = predictor_train(pairs, s, cfg);
  for (const auto& c : enumerate_subnets(s)) EXPECT_NEAR(p.predict(encode_arch(c, s)), 0.625, 1e-3);
  EXPECT_THROW(predictor_train({pairs[0]}, s, cfg), SpecError);
}

TEST(Predictor, RanksHeldOutLinearOracle) {
  const ElasticSpace s = small_space().space;
  const ScoreFn oracle = linear_oracle(s, 12);
  auto all = enumerate_subnets(s);
  std::mt19937_64 rng(3);
  std::shuffle(all.begin(), all.end(), rng);
  std::vector<AccuracyPair> train_pairs;
  for (std::size_t i = 0; i < 96; ++i) train_pairs.push_back({all[i], oracle(all[i])});
  PredictorConfig cfg;
  cfg.seed = 4;
  const AccuracyPredictor p = predictor_train(train_pairs, s, cfg);
  std::vector<double> truth, pred;
  for (std::size_t i = 96; i < all.size(); ++i) {
    truth.push_back(oracle(all[i]));
    pred.push_back(p.predict(encode_arch(all[i], s)));
  }
  EXPECT_GT(kendall_tau(truth, pred), 0.8);
}

TEST(KendallTau, Examples) {
  const std::vector<double> a{1, 2, 3, 4};
  const std::vector<double> r{4, 3, 2, 1};
  EXPECT_DOUBLE_EQ(kendall_tau(a, a), 1.0);
  EXPECT_DOUBLE_EQ(kendall_tau(a, r), -1.0);
}

TEST(Evolve, SingletonSpace) {
  ElasticSpace s = tiny_default_space();
  for (auto& o : s.stages) o = StageOptions{{2}, {5}, {3}, {4}, {5}};
  SearchConfig sc;
  sc.population = 4;
  sc.generations = 2;
  EXPECT_EQ(evolve([](const SubNetConfig&) { return 0.0; }, s, sc).best, smallest_subnet(s));
}

TEST(Evolve, FindsBruteForceArgmax) {
  const io::SpaceFile f = small_space();
  const auto all = enumerate_subnets(f.space);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ScoreFn oracle = linear_oracle(f.space, 100 + seed);
    const auto best = *std::max_element(all.begin(), all.end(), [&](const auto& a, const auto& b) {
      return oracle(a) < oracle(b);
    });
    SearchConfig sc = f.search;
    sc.seed = seed;
    EXPECT_EQ(evolve(oracle, f.space, sc).best, best) << "seed " << seed;
  }
}

TEST(Evolve, MonotoneOracleGivesMaximalConfig) {
  ElasticSpace s = tiny_default_space();
  for (int st = 0; st < 3; ++st) s.stages[st] = StageOptions{{2}, {3}, {3}, {2}, {3}};
  for (int st = 3; st < kNumStages; ++st) s.stages[st] = StageOptions{{2, 3}, {3, 5, 7}, {3, 6}, {2}, {3, 5}};
  ASSERT_EQ(s.size(), 1872u * 1872u);
  auto index_sum = [&](const SubNetConfig& c) {
    double v = 0;
    for (std::size_t st = 0; st < c.stages.size(); ++st) {
      const StageOptions& o = s.stages[st];
      auto pos = [](const std::vector<int>& opts, int x) {
        return static_cast<double>(std::find(opts.begin(), opts.end(), x) - opts.begin());
      };
      v += 10 * pos(o.depth, c.stages[st].depth());
      for (const auto& b : c.stages[st].blocks) {
        v += pos(o.kernel, b.kernel) + pos(o.expand, b.expand) + pos(o.lite_kernel, b.lite_kernel) -
             pos(o.lite_groups, b.lite_groups);
      }
    }
    return v;
  };
  SearchConfig sc;
  sc.seed = 2;
  const SearchResult r = evolve(index_sum, s, sc);
  EXPECT_EQ(r.best, largest_subnet(s));
  EXPECT_EQ(r.best_score, r.ranked.front().second);
  SearchConfig bad;
  bad.population = 1;
  EXPECT_THROW(bad.validate(), SpecError);
}

TEST(AdaptPipeline, PhaseMemoryAndCost) {
  io::SpaceFile f = small_space();
  Supernet sn = build_supernet(f.space, InitStrategy::kRandomZeroScale, 5);
  const Dataset data = synth(10, 6);
  PipelineConfig cfg;
  cfg.phase1_epochs = 1;
  cfg.final_epochs = 1;
  cfg.n_pairs = 6;
  cfg.rerank_top_k = 2;
  cfg.predictor.epochs = 10;
  cfg.search.population = 6;
  cfg.search.generations = 2;
  cfg.seed = 3;
  const PipelineResult r = adapt_pipeline(sn, data, cfg);
  EXPECT_NO_THROW(validate_config(r.best, f.space));
  EXPECT_EQ(r.pairs.size(), 6u);
  EXPECT_EQ(r.cost.phase2_peak_saved_bytes, 0u);
  const FineTunePolicy lb(PolicyKind::kTinyTLLB);
  const SubNetConfig hi = largest_subnet(f.space);
  EXPECT_EQ(r.cost.phase1_peak_saved_bytes,
            model_footprint(subnet_arch(f.space, hi), lb, cfg.batch, hi.resolution).activation_bytes);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const SubNetConfig c = sample_subnet(f.space, seed);
    EXPECT_LE(model_footprint(subnet_arch(f.space, c), lb, cfg.batch, 32).activation_bytes,
              r.cost.phase1_peak_saved_bytes);
  }

  ASSERT_EQ(r.cost.phases.size(), 3u);
  auto mac = [&](const SubNetConfig& c, MacMode m) {
    return static_cast<double>(mac_count(subnet_arch(f.space, c), m, lb, 1, 32));
  };
  const SubNetConfig lo = smallest_subnet(f.space);
  const double n = static_cast<double>(data.size());
  const double p1 = 0.5 * (mac(lo, MacMode::kTraining) + mac(hi, MacMode::kTraining)) * n * 0.8;
  const double p2 = 0.5 * (mac(lo, MacMode::kInference) + mac(hi, MacMode::kInference)) * n * 0.2 * 6;
  const double p3 = mac(r.best, MacMode::kTraining) * n;
  EXPECT_DOUBLE_EQ(r.cost.phases[0].total_mac, p1);
  EXPECT_DOUBLE_EQ(r.cost.phases[1].total_mac, p2);
  EXPECT_DOUBLE_EQ(r.cost.phases[2].total_mac, p3);
  EXPECT_DOUBLE_EQ(r.cost.total_mac, p1 + p2 + p3);
  EXPECT_EQ(r.model.arch(), subnet_arch(f.space, r.best));
}

}  // namespace
}  // namespace tinytl
