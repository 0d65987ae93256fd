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

#include "episcen/ga.hpp"

#include <cmath>
#include <limits>
#include <utility>

#include "episcen/errors.hpp"

namespace episcen {

void GaConfig::validate() const {
    if (population_size < 2 || population_size % 2 != 0)
        throw ContractError("population_size must be even and >= 2");
    if (max_evaluations < population_size) throw ContractError("max_evaluations must cover the initial population");
    if (crossover_prob < 0.0 || crossover_prob > 1.0) throw ContractError("crossover_prob outside [0, 1]");
    if (mutation_prob < 0.0 || mutation_prob > 1.0) throw ContractError("mutation_prob outside [0, 1]");
}

std::pair<ScenarioGenome, ScenarioGenome> uniform_crossover(const ScenarioGenome& a, const ScenarioGenome& b, Rng& rng) {
    ScenarioGenome x = a, y = b;
    for (std::size_t j = 0; j < kGeneCount; ++j)
        if (rng.coin()) std::swap(x[j], y[j]);
    return {clamp_repair(x), clamp_repair(y)};
}

ScenarioGenome mutate(const ScenarioGenome& g, double rate, Rng& rng) {
    ScenarioGenome out = g;
    for (std::size_t j = 0; j < kGeneCount; ++j)
        if (rng.uniform() < rate) out[j] = sample_gene(gene_specs()[j], rng);
    return clamp_repair(out);
}

std::unique_ptr<GsProvider> make_equal_provider() { return std::make_unique<EqualProvider>(); }

namespace {

Individual single_cell(const ScenarioGenome& g) {
    Individual ind;
    ind.cells.resize(1);
    ind.cells[0].solution = g;
    return ind;
}

}  // namespace

SearchTrace run_ga(const GaConfig& cfg, const Evaluator& evaluator) {
    cfg.validate();
    const auto T = static_cast<std::size_t>(cfg.population_size);
    const auto budget = static_cast<std::uint64_t>(cfg.max_evaluations);

    // Same stream layout as run_epiga so that both start from the same initial population.
    Rng rng(derive_seed(cfg.seed, {0x5ea7c4ULL}));
    SearchTrace trace;
    trace.method = cfg.random_search ? "random" : "ga";
    std::uint64_t evals = 0;
    double best_fitness = std::numeric_limits<double>::infinity();

    auto evaluate = [&](Population& pop) {
        std::vector<ScenarioGenome> genomes;
        std::vector<std::uint64_t> seeds;
        for (std::size_t i = 0; i < pop.size(); ++i) {
            genomes.push_back(pop.individuals[i].cells[0].solution);
            seeds.push_back(episode_seed_for(cfg.seed, evals + i));
        }
        auto results = evaluate_batch(evaluator, genomes, seeds, cfg.threads);
        for (std::size_t i = 0; i < pop.size(); ++i) {
            if (!std::isfinite(results[i].fitness) || results[i].fitness < 0.0)
                throw NumericError("evaluator returned an invalid fitness");
            Cell& cell = pop.individuals[i].cells[0];
            cell.fitness = results[i].fitness;
            cell.state = std::move(results[i].state);
            if (*cell.fitness < best_fitness) {
                best_fitness = *cell.fitness;
                trace.best_genome = cell.solution;
            }
        }
        evals += pop.size();
    };

    Population pop;
    for (std::size_t i = 0; i < T; ++i) pop.individuals.push_back(single_cell(sample_uniform(rng)));

    try {
        evaluate(pop);
        trace.generations.push_back(summarize(pop, evals));
        while (evals + T <= budget) {
            Population offspring;
            offspring.generation = pop.generation + 1;
            for (std::size_t pair = 0; pair < T / 2; ++pair) {
                ScenarioGenome a, b;
                if (cfg.random_search) {
                    a = sample_uniform(rng);
                    b = sample_uniform(rng);
                } else {
                    a = pop.individuals[binary_tournament(pop, rng)].cells[0].solution;
                    b = pop.individuals[binary_tournament(pop, rng)].cells[0].solution;
                    if (rng.uniform() < cfg.crossover_prob) std::tie(a, b) = uniform_crossover(a, b, rng);
                    a = mutate(a, cfg.mutation_prob, rng);
                    b = mutate(b, cfg.mutation_prob, rng);
                }
                offspring.individuals.push_back(single_cell(a));
                offspring.individuals.push_back(single_cell(b));
            }
            evaluate(offspring);
            pop = elitist_replacement(pop, offspring);
            trace.generations.push_back(summarize(pop, evals));
        }
    } catch (const std::exception& e) {
        trace.best_fitness = best_fitness;
        throw SearchAborted(std::string("ga search aborted after ") + std::to_string(evals) + " evaluations: " + e.what(),
                            std::move(trace));
    }
    trace.best_fitness = best_fitness;
    return trace;
}

}  // namespace episcen
