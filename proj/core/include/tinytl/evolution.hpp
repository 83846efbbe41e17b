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

#ifndef TINYTL_EVOLUTION_HPP_
#define TINYTL_EVOLUTION_HPP_

#include <cstdint>
#include <functional>
#include <random>
#include <utility>
#include <vector>

#include "tinytl/elastic.hpp"
#include "tinytl/predictor.hpp"

namespace tinytl {

struct SearchConfig {
  int population = 100;
  int generations = 30;
  double mutation = 0.1;
  double parent_fraction = 0.25;
  std::uint64_t seed = 0;

  void validate() const;
};

using ScoreFn = std::function<double(const SubNetConfig&)>;

struct SearchResult {
  SubNetConfig best;
  double best_score = 0.0;
  // Every distinct configuration scored, best first (ties broken by config
  // order, so the ranking is deterministic).
  std::vector<std::pair<SubNetConfig, double>> ranked;
};

// Resamples each choice with probability `p`; a depth change adds freshly
// sampled blocks or drops trailing ones.
SubNetConfig mutate(const SubNetConfig& c, const ElasticSpace& space, double p,
                    std::mt19937_64& rng);
// Uniform crossover per stage depth, per block slot and for the resolution.
SubNetConfig crossover(const SubNetConfig& a, const SubNetConfig& b, std::mt19937_64& rng);

// Seeded population; each generation keeps the top parent fraction and
// refills half by mutation and half by crossover. Returns the argmax over
// every configuration scored.
SearchResult evolve(const ScoreFn& score, const ElasticSpace& space, const SearchConfig& config);
SearchResult evolve(const AccuracyPredictor& predictor, const ElasticSpace& space,
                    const SearchConfig& config);

}  // namespace tinytl

#endif  // TINYTL_EVOLUTION_HPP_
