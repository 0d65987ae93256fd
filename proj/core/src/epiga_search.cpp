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

#include <cmath>
#include <limits>

#include "episcen/epiga.hpp"
#include "episcen/errors.hpp"

namespace episcen {

namespace {

struct CellRef {
    std::size_t individual;
    std::size_t cell;
};

class BestTracker {
public:
    void offer(const ScenarioGenome& g, double f) {
        if (f < fitness_) {
            fitness_ = f;
            genome_ = g;
        }
    }
    void store(SearchTrace& trace) const {
        trace.best_genome = genome_;
        trace.best_fitness = fitness_;
    }

private:
    ScenarioGenome genome_;
    double fitness_ = std::numeric_limits<double>::infinity();
};

// Evaluates the referenced cells of `pop` in order; evaluation indices start at `first_index`.
void evaluate_cells(Population& pop, std::span<const CellRef> refs, const Evaluator& evaluator,
                    std::uint64_t run_seed, std::uint64_t first_index, unsigned threads, BestTracker& best) {
    std::vector<ScenarioGenome> genomes;
    std::vector<std::uint64_t> seeds;
    genomes.reserve(refs.size());
    seeds.reserve(refs.size());
    for (std::size_t i = 0; i < refs.size(); ++i) {
        genomes.push_back(pop.individuals[refs[i].individual].cells[refs[i].cell].solution);
        seeds.push_back(episode_seed_for(run_seed, first_index + i));
    }
    auto results = evaluate_batch(evaluator, genomes, seeds, threads);
    for (std::size_t i = 0; i < refs.size(); ++i) {
        if (!std::isfinite(results[i].fitness) || results[i].fitness < 0.0)
            throw NumericError("evaluator returned an invalid fitness");
        Cell& cell = pop.individuals[refs[i].individual].cells[refs[i].cell];
        cell.fitness = results[i].fitness;
        cell.state = std::move(results[i].state);
        best.offer(cell.solution, *cell.fitness);
    }
}

}  // namespace

SearchTrace run_epiga(const EpiGaConfig& cfg, const GsProvider& provider, const Evaluator& evaluator) {
    cfg.validate();
    const auto T = static_cast<std::size_t>(cfg.population_size);
    const auto M = static_cast<std::size_t>(cfg.cells_per_individual);
    const auto budget = static_cast<std::uint64_t>(cfg.max_evaluations);

    Rng rng(derive_seed(cfg.seed, {0x5ea7c4ULL}));
    SearchTrace trace;
    trace.method = "epiga";
    BestTracker best;
    std::uint64_t evals = 0;

    Population pop;
    std::vector<CellRef> refs;
    pop.individuals.resize(T);
    for (std::size_t i = 0; i < T; ++i) {
        pop.individuals[i].cells.resize(M);
        for (std::size_t c = 0; c < M; ++c) {
            pop.individuals[i].cells[c].solution = sample_uniform(rng);
            refs.push_back({i, c});
        }
    }

    try {
        evaluate_cells(pop, refs, evaluator, cfg.seed, evals, cfg.threads, best);
        evals += refs.size();
        trace.generations.push_back(summarize(pop, evals));

        while (evals + T <= budget) {
            Population offspring;
            offspring.generation = pop.generation + 1;
            offspring.individuals.reserve(T);
            refs.clear();
            for (std::size_t pair = 0; pair < T / 2; ++pair) {
                Individual p1 = pop.individuals[binary_tournament(pop, rng)];
                Individual p2 = pop.individuals[binary_tournament(pop, rng)];
                for (auto* parent : {&p1, &p2})
                    for (auto& cell : parent->cells)
                        cell.mask = nucleosome_generation(kGeneCount, cfg.nucleosome_prob, cfg.nucleosome_radius, rng);

                Reproduction rep = reproduce_individuals(p1, p2);
                for (auto [ind, slot] : {std::pair{&rep.first, rep.first_slot}, std::pair{&rep.second, rep.second_slot}}) {
                    Cell& child = ind->cells[slot];
                    const GsProbabilities probs = provider.query(child.state);
                    if (!probs.valid()) throw NumericError("GS provider returned probabilities outside [0, 1]");
                    child = gene_silencing(child, probs, cfg.epigenetic_prob, rng, &trace.expression);
                    child.fitness.reset();
                    refs.push_back({offspring.individuals.size(), slot});
                    offspring.individuals.push_back(std::move(*ind));
                }
            }
            evaluate_cells(offspring, refs, evaluator, cfg.seed, evals, cfg.threads, best);
            evals += refs.size();
            pop = elitist_replacement(pop, offspring);
            trace.generations.push_back(summarize(pop, evals));
        }
    } catch (const SearchAborted&) {
        throw;
    } catch (const std::exception& e) {
        best.store(trace);
        throw SearchAborted(std::string("epiga search aborted after ") + std::to_string(evals) +
                                " evaluations: " + e.what(),
                            std::move(trace));
    }
    best.store(trace);
    return trace;
}

}  // namespace episcen
