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

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

#include "episcen/epiga.hpp"
#include "episcen/errors.hpp"

namespace episcen {

// ---- types -----------------------------------------------------------------

NucleosomeMask::NucleosomeMask(std::initializer_list<int> bits) {
    bits_.reserve(bits.size());
    for (int b : bits) bits_.push_back(b != 0 ? 1 : 0);
}

std::size_t NucleosomeMask::count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

NucleosomeMask NucleosomeMask::operator|(const NucleosomeMask& other) const {
    if (size() != other.size()) throw ContractError("nucleosome masks differ in length");
    NucleosomeMask out(size());
    for (std::size_t j = 0; j < size(); ++j) out.bits_[j] = bits_[j] | other.bits_[j];
    return out;
}

bool Individual::evaluated() const noexcept {
    return !cells.empty() && std::all_of(cells.begin(), cells.end(), [](const Cell& c) { return c.fitness.has_value(); });
}

double Individual::fitness() const { return *cells.at(best_cell()).fitness; }

std::size_t Individual::best_cell() const {
    if (!evaluated()) throw ContractError("individual has unevaluated cells");
    std::size_t best = 0;
    for (std::size_t i = 1; i < cells.size(); ++i)
        if (*cells[i].fitness < *cells[best].fitness) best = i;
    return best;
}

std::size_t Individual::worst_cell() const {
    if (!evaluated()) throw ContractError("individual has unevaluated cells");
    std::size_t worst = 0;
    for (std::size_t i = 1; i < cells.size(); ++i)
        if (*cells[i].fitness > *cells[worst].fitness) worst = i;
    return worst;
}

GsProbabilities GsProbabilities::uniform(double p) {
    GsProbabilities out;
    out.silencing.fill(p);
    return out;
}

GsProbabilities GsProbabilities::from_expression(std::span<const double, kGeneCount> expression) {
    GsProbabilities out;
    for (std::size_t j = 0; j < kGeneCount; ++j) out.silencing[j] = 1.0 - expression[j];
    return out;
}

bool GsProbabilities::valid() const noexcept {
    return std::all_of(silencing.begin(), silencing.end(), [](double p) { return p >= 0.0 && p <= 1.0; });
}

void ExpressionTally::record_prediction(const GsProbabilities& probs) {
    for (std::size_t j = 0; j < kGeneCount; ++j) predicted_expression_sum[j] += probs.expression(j);
}

void ExpressionTally::merge(const ExpressionTally& other) {
    invocations += other.invocations;
    for (std::size_t j = 0; j < kGeneCount; ++j) {
        collapsed[j] += other.collapsed[j];
        expressed[j] += other.expressed[j];
        predicted_expression_sum[j] += other.predicted_expression_sum[j];
    }
}

void EpiGaConfig::validate() const {
    if (population_size < 2 || population_size % 2 != 0)
        throw ContractError("population_size must be even and >= 2");
    if (cells_per_individual < 1) throw ContractError("cells_per_individual must be >= 1");
    if (max_evaluations < population_size * cells_per_individual)
        throw ContractError("max_evaluations must cover the initial population");
    if (nucleosome_prob < 0.0 || nucleosome_prob > 1.0) throw ContractError("nucleosome_prob outside [0, 1]");
    if (nucleosome_radius < 0) throw ContractError("nucleosome_radius must be >= 0");
    if (epigenetic_prob < 0.0 || epigenetic_prob > 1.0) throw ContractError("epigenetic_prob outside [0, 1]");
}

std::optional<int> SearchTrace::first_generation_at_or_below(double threshold) const {
    for (const auto& g : generations)
        if (g.fitness_best <= threshold) return g.generation;
    return std::nullopt;
}

// ---- operators -------------------------------------------------------------

NucleosomeMask nucleosome_generation(std::size_t length, double pr_n, int radius, Rng& rng) {
    if (length == 0) throw ContractError("nucleosome_generation: empty mask");
    if (radius < 0) throw ContractError("nucleosome_generation: negative radius");
    NucleosomeMask mask(length);
    const auto r = static_cast<std::ptrdiff_t>(radius);
    const auto last = static_cast<std::ptrdiff_t>(length) - 1;
    for (std::ptrdiff_t k = 0; k <= last; ++k) {
        if (rng.uniform() >= pr_n) continue;
        for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(k - r, 0); j <= std::min(k + r, last); ++j)
            mask.set(static_cast<std::size_t>(j));
    }
    return mask;
}

std::pair<std::vector<double>, std::vector<double>> recombine_masked(std::span<const double> x1,
                                                                     std::span<const double> x2,
                                                                     const NucleosomeMask& mask1,
                                                                     const NucleosomeMask& mask2) {
    if (x1.size() != x2.size() || mask1.size() != x1.size() || mask2.size() != x1.size())
        throw ContractError("recombine_masked: length mismatch");
    const NucleosomeMask n = mask1 | mask2;
    std::vector<double> y1(x1.size()), y2(x2.size());
    for (std::size_t j = 0; j < n.size(); ++j) {
        if (n.collapsed(j)) {
            y1[j] = x1[j];
            y2[j] = x2[j];
        } else {
            y1[j] = x2[j];
            y2[j] = x1[j];
        }
    }
    return {std::move(y1), std::move(y2)};
}

std::pair<Cell, Cell> nbr(const Cell& c1, const Cell& c2) {
    if (c1.mask.size() != kGeneCount || c2.mask.size() != kGeneCount)
        throw ContractError("nbr: mask length differs from genome length");
    auto [y1, y2] = recombine_masked(c1.solution.values, c2.solution.values, c1.mask, c2.mask);
    const NucleosomeMask n = c1.mask | c2.mask;
    Cell o1, o2;
    std::copy(y1.begin(), y1.end(), o1.solution.values.begin());
    std::copy(y2.begin(), y2.end(), o2.solution.values.begin());
    o1.solution = clamp_repair(o1.solution);
    o2.solution = clamp_repair(o2.solution);
    o1.mask = n;
    o2.mask = n;
    o1.state = c1.state;
    o2.state = c2.state;
    return {std::move(o1), std::move(o2)};
}

Reproduction reproduce_individuals(const Individual& i1, const Individual& i2) {
    if (!i1.evaluated() || !i2.evaluated()) throw ContractError("reproduce_individuals: unevaluated cells");
    auto [o1, o2] = nbr(i1.cells[i1.best_cell()], i2.cells[i2.best_cell()]);
    Reproduction out{i1, i2, i1.worst_cell(), i2.worst_cell()};
    out.first.cells[out.first_slot] = std::move(o1);
    out.second.cells[out.second_slot] = std::move(o2);
    return out;
}

namespace {

constexpr int kMaxExpressAttempts = 10000;

// Resample gene j. For the NPC offset pair the coordinate is redrawn until the
// 5 m constraint holds with the partner coordinate fixed, so silencing never
// touches a position other than the one being expressed.
void express(ScenarioGenome& g, std::size_t j, Rng& rng) {
    const auto& spec = gene_specs()[j];
    const bool npc_pair = j == idx(Gene::NpcLon) || j == idx(Gene::NpcLat);
    for (int attempt = 0; attempt < kMaxExpressAttempts; ++attempt) {
        g[j] = sample_gene(spec, rng);
        if (!npc_pair || std::hypot(g.npc_lon(), g.npc_lat()) >= kMinNpcDistance) return;
    }
    throw InternalError("gene_silencing: NPC resample loop exhausted");
}

}  // namespace

Cell gene_silencing(const Cell& cell, const GsProbabilities& probs, double pr_e, Rng& rng, ExpressionTally* tally) {
    if (cell.mask.size() != kGeneCount) throw ContractError("gene_silencing: mask length differs from genome length");
    Cell out = cell;
    bool changed = false;
    if (tally) {
        ++tally->invocations;
        tally->record_prediction(probs);
    }
    for (std::size_t j = 0; j < kGeneCount; ++j) {
        if (!cell.mask.collapsed(j)) continue;
        if (tally) ++tally->collapsed[j];
        if (rng.uniform() < pr_e && rng.uniform() > probs.silencing[j]) {
            express(out.solution, j, rng);
            changed = true;
            if (tally) ++tally->expressed[j];
        }
    }
    if (changed) {
        out.solution = clamp_repair(out.solution);
        out.fitness.reset();
    }
    return out;
}

std::size_t binary_tournament(const Population& pop, Rng& rng) {
    const std::size_t n = pop.size();
    if (n < 2) throw ContractError("binary_tournament: population needs at least two individuals");
    const std::size_t a = rng.index(n);
    std::size_t b = rng.index(n - 1);
    if (b >= a) ++b;
    const double fa = pop.individuals[a].fitness();
    const double fb = pop.individuals[b].fitness();
    if (fa < fb) return a;
    if (fb < fa) return b;
    return rng.coin() ? a : b;
}

Population elitist_replacement(const Population& old, const Population& offspring) {
    const std::size_t keep = old.size();
    std::vector<const Individual*> pool;
    pool.reserve(old.size() + offspring.size());
    for (const auto& ind : old.individuals) pool.push_back(&ind);
    for (const auto& ind : offspring.individuals) pool.push_back(&ind);
    std::vector<double> fit(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) fit[i] = pool[i]->fitness();
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fit[a] < fit[b]; });
    Population next;
    next.generation = std::max(old.generation, offspring.generation);
    next.individuals.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) next.individuals.push_back(*pool[order[i]]);
    return next;
}

std::vector<Evaluation> evaluate_batch(const Evaluator& evaluator, std::span<const ScenarioGenome> genomes,
                                       std::span<const std::uint64_t> seeds, unsigned threads) {
    if (genomes.size() != seeds.size()) throw ContractError("evaluate_batch: one seed per genome required");
    std::vector<Evaluation> out(genomes.size());
    const unsigned workers = std::min<unsigned>(std::max(threads, 1u), static_cast<unsigned>(genomes.size()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < genomes.size(); ++i) out[i] = evaluator(genomes[i], seeds[i]);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(genomes.size());
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < genomes.size(); i = next++) {
                    try {
                        out[i] = evaluator(genomes[i], seeds[i]);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

std::uint64_t episode_seed_for(std::uint64_t run_seed, std::uint64_t evaluation_index) {
    return derive_seed(run_seed, {0xe915ULL, evaluation_index});
}

GenerationRecord summarize(const Population& pop, std::uint64_t evaluations_used) {
    GenerationRecord rec;
    rec.generation = pop.generation;
    rec.evaluations_used = evaluations_used;
    double sum = 0.0;
    double best = 0.0;
    for (std::size_t i = 0; i < pop.size(); ++i) {
        const double f = pop.individuals[i].fitness();
        sum += f;
        if (i == 0 || f < best) best = f;
    }
    rec.fitness_avg = pop.size() ? sum / static_cast<double>(pop.size()) : 0.0;
    rec.fitness_best = best;
    return rec;
}

}  // namespace episcen
