// Copyright 2026 The episcen Authors
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

#pragma once

#include <cstdint>
#include <memory>

#include "episcen/epiga.hpp"

namespace episcen {

struct GaConfig {
    int population_size = 20;
    int max_evaluations = 1000;
    double crossover_prob = 0.9;
    double mutation_prob = 1.0 / static_cast<double>(kGeneCount);
    std::uint64_t seed = 0;
    unsigned threads = 1;
    /// Sanity-check mode: every offspring is a fresh uniform genome.
    bool random_search = false;

    void validate() const;
};

/// Generational GA: binary tournament, uniform crossover, per-gene uniform
/// resample mutation, elitist replacement. Same trace format as run_epiga.
SearchTrace run_ga(const GaConfig& cfg, const Evaluator& evaluator);

/// Uniform crossover: each position swapped between the two children with probability 1/2.
std::pair<ScenarioGenome, ScenarioGenome> uniform_crossover(const ScenarioGenome& a, const ScenarioGenome& b, Rng& rng);

/// Each gene resampled from its spec with probability `rate`; result repaired.
ScenarioGenome mutate(const ScenarioGenome& g, double rate, Rng& rng);

/// Provider that silences every gene with probability 0.5, whatever the state.
class EqualProvider final : public GsProvider {
public:
    GsProbabilities query(std::span<const double>) const override { return GsProbabilities::uniform(0.5); }
    std::string name() const override { return "equal"; }
};

std::unique_ptr<GsProvider> make_equal_provider();

}  // namespace episcen
