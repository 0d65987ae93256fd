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

// Epigenetic GA engine: cell/individual/population hierarchy, nucleosome
// generation, nucleosome-based reproduction, gene silencing, and the
// generational search loop.

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "episcen/rng.hpp"
#include "episcen/scenario.hpp"

namespace episcen {

/// Binary mask over gene positions; a set bit marks a collapsed position.
class NucleosomeMask {
public:
    NucleosomeMask() = default;
    explicit NucleosomeMask(std::size_t length) : bits_(length, 0) {}
    NucleosomeMask(std::initializer_list<int> bits);

    std::size_t size() const noexcept { return bits_.size(); }
    bool collapsed(std::size_t j) const { return bits_.at(j) != 0; }
    void set(std::size_t j, bool value = true) { bits_.at(j) = value ? 1 : 0; }
    std::size_t count() const noexcept;

    NucleosomeMask operator|(const NucleosomeMask& other) const;
    friend bool operator==(const NucleosomeMask&, const NucleosomeMask&) = default;

private:
    std::vector<std::uint8_t> bits_;
};

struct Cell {
    ScenarioGenome solution;
    NucleosomeMask mask{kGeneCount};
    std::optional<double> fitness;
    /// Environment-state features from the most recent episode of this cell
    /// (or of its parent, for an offspring that has not been evaluated yet).
    std::vector<double> state;
};

struct Individual {
    std::vector<Cell> cells;

    bool evaluated() const noexcept;
    /// Best (minimum) cell fitness. Throws ContractError if unevaluated.
    double fitness() const;
    /// Lowest-fitness cell; ties go to the lowest index.
    std::size_t best_cell() const;
    /// Highest-fitness cell; ties go to the lowest index.
    std::size_t worst_cell() const;
};

struct Population {
    std::vector<Individual> individuals;
    int generation = 0;

    std::size_t size() const noexcept { return individuals.size(); }
};

/// Per-gene silencing probabilities; expression probability is the complement.
struct GsProbabilities {
    std::array<double, kGeneCount> silencing{};

    static GsProbabilities uniform(double p);
    static GsProbabilities from_expression(std::span<const double, kGeneCount> expression);

    double expression(std::size_t j) const { return 1.0 - silencing[j]; }
    bool valid() const noexcept;
};

/// Source of silencing probabilities for a given environment state.
class GsProvider {
public:
    virtual ~GsProvider() = default;
    virtual GsProbabilities query(std::span<const double> state) const = 0;
    virtual std::string name() const = 0;
};

/// Bookkeeping of gene-silencing activity: how often each gene was collapsed,
/// expressed, and what expression probability the provider predicted.
struct ExpressionTally {
    std::uint64_t invocations = 0;
    std::array<std::uint64_t, kGeneCount> collapsed{};
    std::array<std::uint64_t, kGeneCount> expressed{};
    std::array<double, kGeneCount> predicted_expression_sum{};

    void record_prediction(const GsProbabilities& probs);
    void merge(const ExpressionTally& other);
};

struct EpiGaConfig {
    int population_size = 20;
    int cells_per_individual = 1;
    int max_evaluations = 1000;
    double nucleosome_prob = 0.2;
    int nucleosome_radius = 1;
    double epigenetic_prob = 0.01;
    std::uint64_t seed = 0;
    /// Worker threads for evaluating one generation; results are merged in index order.
    unsigned threads = 1;

    void validate() const;
};

struct Evaluation {
    double fitness = 0.0;
    std::vector<double> state;
};

/// Maps a genome and an episode seed to its fitness and state features.
/// Must be safe to call concurrently when threads > 1.
using Evaluator = std::function<Evaluation(const ScenarioGenome&, std::uint64_t episode_seed)>;

struct GenerationRecord {
    int generation = 0;
    double fitness_avg = 0.0;
    double fitness_best = 0.0;
    std::uint64_t evaluations_used = 0;
};

struct SearchTrace {
    std::string method;
    std::vector<GenerationRecord> generations;
    ExpressionTally expression;
    ScenarioGenome best_genome;
    double best_fitness = 0.0;

    /// First generation whose best fitness is <= threshold, or nullopt.
    std::optional<int> first_generation_at_or_below(double threshold) const;
};

/// Thrown when an evaluation fails mid-search; carries the generations completed so far.
class SearchAborted : public std::runtime_error {
public:
    SearchAborted(const std::string& what, SearchTrace partial)
        : std::runtime_error(what), partial_(std::move(partial)) {}
    const SearchTrace& partial() const noexcept { return partial_; }

private:
    SearchTrace partial_;
};

// ---- operators -------------------------------------------------------------

/// Fresh mask: each position k fires with probability pr_n and collapses the
/// inclusive window [max(k-R, 0), min(k+R, len-1)].
NucleosomeMask nucleosome_generation(std::size_t length, double pr_n, int radius, Rng& rng);

/// Swap values at positions not collapsed in (mask1 | mask2). Works on any length.
std::pair<std::vector<double>, std::vector<double>> recombine_masked(std::span<const double> x1,
                                                                     std::span<const double> x2,
                                                                     const NucleosomeMask& mask1,
                                                                     const NucleosomeMask& mask2);

/// Nucleosome-based reproduction of two cells. Offspring carry the OR-ed mask,
/// are repaired, unevaluated, and inherit their first-parent state snapshot.
std::pair<Cell, Cell> nbr(const Cell& c1, const Cell& c2);

struct Reproduction {
    Individual first;
    Individual second;
    std::size_t first_slot = 0;   // cell index replaced in `first`
    std::size_t second_slot = 0;
};

/// NBR on the best cells of two evaluated individuals; each offspring replaces
/// the worst cell of its respective parent.
Reproduction reproduce_individuals(const Individual& i1, const Individual& i2);

/// Gene silencing: position j is re-expressed (resampled from its spec) when
/// collapsed, a first draw < pr_e, and a second draw > silencing[j].
Cell gene_silencing(const Cell& cell, const GsProbabilities& probs, double pr_e, Rng& rng,
                    ExpressionTally* tally = nullptr);

/// Index of the winner of a binary tournament between two distinct individuals.
std::size_t binary_tournament(const Population& pop, Rng& rng);

/// Best T of old + offspring by fitness; ties favor the old population, then lower index.
Population elitist_replacement(const Population& old, const Population& offspring);

/// Evaluate genomes in order; with threads > 1 evaluations run concurrently.
std::vector<Evaluation> evaluate_batch(const Evaluator& evaluator, std::span<const ScenarioGenome> genomes,
                                       std::span<const std::uint64_t> seeds, unsigned threads);

/// Seed used for the k-th evaluation of a search run.
std::uint64_t episode_seed_for(std::uint64_t run_seed, std::uint64_t evaluation_index);

GenerationRecord summarize(const Population& pop, std::uint64_t evaluations_used);

SearchTrace run_epiga(const EpiGaConfig& cfg, const GsProvider& provider, const Evaluator& evaluator);

}  // namespace episcen
