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

#include "tinytl/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "tinytl/errors.hpp"

namespace tinytl {
namespace {

int pick(const std::vector<int>& opts, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, opts.size() - 1);
  return opts[d(rng)];
}

bool coin(std::mt19937_64& rng, double p) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

BlockChoice random_block(const StageOptions& o, std::mt19937_64& rng) {
  BlockChoice b;
  b.kernel = pick(o.kernel, rng);
  b.expand = pick(o.expand, rng);
  b.lite_groups = pick(o.lite_groups, rng);
  b.lite_kernel = pick(o.lite_kernel, rng);
  return b;
}

}  // namespace

void SearchConfig::validate() const {
  if (population < 2) throw SpecError("search: population must be >= 2");
  if (generations < 0) throw SpecError("search: generations must be >= 0");
  if (!(mutation >= 0.0 && mutation <= 1.0)) throw SpecError("search: mutation outside [0, 1]");
  if (!(parent_fraction > 0.0 && parent_fraction <= 1.0)) {
    throw SpecError("search: parent fraction outside (0, 1]");
  }
}

SubNetConfig mutate(const SubNetConfig& c, const ElasticSpace& space, double p,
                    std::mt19937_64& rng) {
  SubNetConfig out = c;
  for (std::size_t s = 0; s < out.stages.size(); ++s) {
    const StageOptions& o = space.stages[s];
    auto& blocks = out.stages[s].blocks;
    if (coin(rng, p)) {
      const auto d = static_cast<std::size_t>(pick(o.depth, rng));
      while (blocks.size() < d) blocks.push_back(random_block(o, rng));
      blocks.resize(d);
    }
    for (auto& b : blocks) {
      if (coin(rng, p)) b.kernel = pick(o.kernel, rng);
      if (coin(rng, p)) b.expand = pick(o.expand, rng);
      if (coin(rng, p)) b.lite_groups = pick(o.lite_groups, rng);
      if (coin(rng, p)) b.lite_kernel = pick(o.lite_kernel, rng);
    }
  }
  if (coin(rng, p)) out.resolution = pick(space.resolutions, rng);
  return out;
}

SubNetConfig crossover(const SubNetConfig& a, const SubNetConfig& b, std::mt19937_64& rng) {
  SubNetConfig out;
  for (std::size_t s = 0; s < a.stages.size(); ++s) {
    const auto& ba = a.stages[s].blocks;
    const auto& bb = b.stages[s].blocks;
    const std::size_t d = coin(rng, 0.5) ? ba.size() : bb.size();
    StageChoice st;
    for (std::size_t j = 0; j < d; ++j) {
      const bool from_a = coin(rng, 0.5);
      if (j < ba.size() && (from_a || j >= bb.size())) {
        st.blocks.push_back(ba[j]);
      } else {
        st.blocks.push_back(bb[j]);
      }
    }
    out.stages.push_back(std::move(st));
  }
  out.resolution = coin(rng, 0.5) ? a.resolution : b.resolution;
  return out;
}

SearchResult evolve(const ScoreFn& score, const ElasticSpace& space, const SearchConfig& config) {
  config.validate();
  space.validate();
  std::mt19937_64 rng(config.seed);
  std::map<SubNetConfig, double> seen;
  auto eval = [&](const SubNetConfig& c) {
    auto it = seen.find(c);
    if (it == seen.end()) it = seen.emplace(c, score(c)).first;
    return it->second;
  };
  auto better = [](const std::pair<SubNetConfig, double>& x,
                   const std::pair<SubNetConfig, double>& y) {
    if (x.second != y.second) return x.second > y.second;
    return x.first < y.first;
  };

  std::vector<SubNetConfig> population;
  for (int i = 0; i < config.population; ++i) population.push_back(sample_subnet(space, rng));
  const auto n_parents = static_cast<std::size_t>(
      std::max(1.0, std::ceil(config.parent_fraction * config.population)));
  for (int gen = 0; gen < config.generations; ++gen) {
    std::vector<std::pair<SubNetConfig, double>> scored;
    for (const auto& c : population) scored.emplace_back(c, eval(c));
    std::sort(scored.begin(), scored.end(), better);
    std::vector<SubNetConfig> parents;
    for (std::size_t i = 0; i < std::min(n_parents, scored.size()); ++i) {
      parents.push_back(scored[i].first);
    }
    population = parents;
    std::uniform_int_distribution<std::size_t> pidx(0, parents.size() - 1);
    const std::size_t n_mut = (static_cast<std::size_t>(config.population) - parents.size()) / 2;
    while (population.size() < parents.size() + n_mut) {
      population.push_back(mutate(parents[pidx(rng)], space, config.mutation, rng));
    }
    while (population.size() < static_cast<std::size_t>(config.population)) {
      const SubNetConfig& a = parents[pidx(rng)];
      const SubNetConfig& b = parents[pidx(rng)];
      population.push_back(crossover(a, b, rng));
    }
  }
  for (const auto& c : population) eval(c);

  SearchResult r;
  r.ranked.assign(seen.begin(), seen.end());
  std::sort(r.ranked.begin(), r.ranked.end(), better);
  r.best = r.ranked.front().first;
  r.best_score = r.ranked.front().second;
  return r;
}

SearchResult evolve(const AccuracyPredictor& predictor, const ElasticSpace& space,
                    const SearchConfig& config) {
  return evolve(
      [&](const SubNetConfig& c) { return predictor.predict(encode_arch(c, space)); }, space,
      config);
}

}  // namespace tinytl
