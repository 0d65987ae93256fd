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

#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>

#include "episcen/epiga.hpp"
#include "episcen/errors.hpp"
#include "episcen/ga.hpp"
#include "episcen_test/oracles.hpp"

namespace episcen {
namespace {

using test::full_mask;
using test::make_cell;

Individual individual_with(std::initializer_list<double> fitnesses, Rng& rng) {
    Individual ind;
    for (double f : fitnesses) ind.cells.push_back(make_cell(sample_uniform(rng), NucleosomeMask(kGeneCount), f));
    return ind;
}

Population population_with(const std::vector<double>& fitnesses, Rng& rng) {
    Population pop;
    for (double f : fitnesses) pop.individuals.push_back(individual_with({f}, rng));
    return pop;
}

/// Sphere on the unit-scaled genes, minimum 0 at the centre of every range.
Evaluation sphere(const ScenarioGenome& g, std::uint64_t) {
    const auto u = scale_unit(g);
    double s = 0.0;
    for (double v : u) s += (v - 0.5) * (v - 0.5);
    return {s, {}};
}

// ---- nucleosome generation -------------------------------------------------

TEST(NucleosomeGeneration, ZeroProbabilityGivesEmptyMask) {
    Rng rng(1);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(nucleosome_generation(10, 0.0, 1, rng).count(), 0u);
}

TEST(NucleosomeGeneration, CertainFiringCollapsesEverything) {
    Rng rng(2);
    EXPECT_EQ(nucleosome_generation(10, 1.0, 1, rng), full_mask(true));
}

TEST(NucleosomeGeneration, RadiusZeroCollapsesOnlyTheFiringPosition) {
    Rng rng(3);
    constexpr int trials = 20000;
    std::array<int, kGeneCount> hits{};
    for (int t = 0; t < trials; ++t) {
        const auto m = nucleosome_generation(kGeneCount, 0.3, 0, rng);
        for (std::size_t j = 0; j < kGeneCount; ++j) hits[j] += m.collapsed(j);
    }
    for (int h : hits) EXPECT_NEAR(h / double(trials), 0.3, test::binomial_band(0.3, trials, 4.0));
}

TEST(NucleosomeGeneration, FrequencyMatchesClosedFormUnion) {
    Rng rng(4);
    constexpr int trials = 100000;
    for (int radius : {1, 2}) {
        std::array<int, kGeneCount> hits{};
        for (int t = 0; t < trials; ++t) {
            const auto m = nucleosome_generation(kGeneCount, 0.2, radius, rng);
            for (std::size_t j = 0; j < kGeneCount; ++j) hits[j] += m.collapsed(j);
        }
        for (std::size_t j = 0; j < kGeneCount; ++j) {
            const double p = test::collapse_probability(j, kGeneCount, 0.2, radius);
            EXPECT_NEAR(hits[j] / double(trials), p, test::binomial_band(p, trials, 4.0)) << "R=" << radius << " j=" << j;
        }
    }
    // Spot values of the closed form: 3 covering windows inside, 2 at the ends.
    EXPECT_NEAR(test::collapse_probability(5, 10, 0.2, 1), 1.0 - 0.8 * 0.8 * 0.8, 1e-15);
    EXPECT_NEAR(test::collapse_probability(0, 10, 0.2, 1), 1.0 - 0.8 * 0.8, 1e-15);
}

TEST(NucleosomeGeneration, RejectsBadArguments) {
    Rng rng(5);
    EXPECT_THROW(nucleosome_generation(0, 0.2, 1, rng), ContractError);
    EXPECT_THROW(nucleosome_generation(10, 0.2, -1, rng), ContractError);
}

// ---- NBR -------------------------------------------------------------------

TEST(Nbr, HandTracedFourGeneExample) {
    // x1 = (a, b, c, d), x2 = (e, f, g, h) encoded as 1..8.
    const std::vector<double> x1{1, 2, 3, 4};
    const std::vector<double> x2{5, 6, 7, 8};
    const NucleosomeMask n1{1, 0, 0, 0};
    const NucleosomeMask n2{0, 0, 1, 0};
    EXPECT_EQ((n1 | n2), (NucleosomeMask{1, 0, 1, 0}));
    const auto [y1, y2] = recombine_masked(x1, x2, n1, n2);
    EXPECT_EQ(y1, (std::vector<double>{1, 6, 3, 8}));   // (a, f, c, h)
    EXPECT_EQ(y2, (std::vector<double>{5, 2, 7, 4}));   // (e, b, g, d)
}

TEST(Nbr, AllCollapsedKeepsParents) {
    Rng rng(6);
    const Cell c1 = make_cell(sample_uniform(rng), full_mask(true));
    const Cell c2 = make_cell(sample_uniform(rng), full_mask(true));
    const auto [o1, o2] = nbr(c1, c2);
    EXPECT_EQ(o1.solution, c1.solution);
    EXPECT_EQ(o2.solution, c2.solution);
}

TEST(Nbr, NothingCollapsedSwapsEverything) {
    Rng rng(7);
    const Cell c1 = make_cell(sample_uniform(rng), full_mask(false));
    const Cell c2 = make_cell(sample_uniform(rng), full_mask(false));
    const auto [o1, o2] = nbr(c1, c2);
    EXPECT_EQ(o1.solution, c2.solution);
    EXPECT_EQ(o2.solution, c1.solution);
    EXPECT_FALSE(o1.fitness.has_value());
}

TEST(Nbr, MaskOrLawAndGeneConservation) {
    Rng rng(8);
    for (int t = 0; t < 10000; ++t) {
        const Cell c1 = make_cell(sample_uniform(rng), test::random_mask(rng, rng.uniform()));
        const Cell c2 = make_cell(sample_uniform(rng), test::random_mask(rng, rng.uniform()));
        const auto [y1, y2] = recombine_masked(c1.solution.values, c2.solution.values, c1.mask, c2.mask);
        const auto [o1, o2] = nbr(c1, c2);
        for (std::size_t j = 0; j < kGeneCount; ++j) {
            const bool either = c1.mask.collapsed(j) || c2.mask.collapsed(j);
            ASSERT_EQ(o1.mask.collapsed(j), either);
            ASSERT_EQ(o2.mask.collapsed(j), either);
            // Before repair the two children hold a permutation of the parents' values.
            std::array<double, 2> before{c1.solution[j], c2.solution[j]};
            std::array<double, 2> after{y1[j], y2[j]};
            std::sort(before.begin(), before.end());
            std::sort(after.begin(), after.end());
            ASSERT_EQ(before, after);
        }
        ScenarioGenome r1, r2;
        std::copy(y1.begin(), y1.end(), r1.values.begin());
        std::copy(y2.begin(), y2.end(), r2.values.begin());
        ASSERT_EQ(o1.solution, clamp_repair(r1));
        ASSERT_EQ(o2.solution, clamp_repair(r2));
        ASSERT_EQ(check_invariants(o1.solution), "");
    }
}

TEST(Nbr, LengthMismatchIsAContractViolation) {
    const std::vector<double> x1{1, 2, 3}, x2{4, 5, 6, 7};
    EXPECT_THROW(recombine_masked(x1, x2, NucleosomeMask(3), NucleosomeMask(4)), ContractError);
    EXPECT_THROW((void)(NucleosomeMask(3) | NucleosomeMask(4)), ContractError);
    Cell bad;
    bad.mask = NucleosomeMask(4);
    EXPECT_THROW(nbr(bad, Cell{}), ContractError);
}

// ---- reproduction -----------------------------------------------------------

TEST(Reproduce, SingleCellIndividualsAreReplacedByTheirChild) {
    Rng rng(9);
    Individual i1 = individual_with({2.0}, rng), i2 = individual_with({1.0}, rng);
    i1.cells[0].mask = full_mask(false);
    i2.cells[0].mask = full_mask(false);
    const Reproduction r = reproduce_individuals(i1, i2);
    ASSERT_EQ(r.first.cells.size(), 1u);
    EXPECT_EQ(r.first.cells[0].solution, i2.cells[0].solution);
    EXPECT_EQ(r.second.cells[0].solution, i1.cells[0].solution);
    EXPECT_FALSE(r.first.cells[0].fitness.has_value());
}

TEST(Reproduce, BestCellParentsAndWorstCellReplaced) {
    Rng rng(10);
    Individual i1 = individual_with({1.0, 3.0}, rng), i2 = individual_with({4.0, 0.5}, rng);
    for (auto* ind : {&i1, &i2})
        for (auto& c : ind->cells) c.mask = full_mask(true);
    const Reproduction r = reproduce_individuals(i1, i2);
    EXPECT_EQ(r.first_slot, 1u);
    EXPECT_EQ(r.second_slot, 0u);
    // All collapsed: children are copies of the best cells.
    EXPECT_EQ(r.first.cells[1].solution, i1.cells[0].solution);
    EXPECT_EQ(r.second.cells[0].solution, i2.cells[1].solution);
    // Untouched cells survive with their fitness.
    EXPECT_EQ(r.first.cells[0].fitness, 1.0);
    EXPECT_EQ(r.second.cells[1].fitness, 0.5);
}

TEST(Reproduce, TiesGoToTheLowestIndex) {
    Rng rng(11);
    const Individual ind = individual_with({2.0, 2.0, 2.0}, rng);
    EXPECT_EQ(ind.best_cell(), 0u);
    EXPECT_EQ(ind.worst_cell(), 0u);
    const Individual mixed = individual_with({3.0, 1.0, 1.0, 3.0}, rng);
    EXPECT_EQ(mixed.best_cell(), 1u);
    EXPECT_EQ(mixed.worst_cell(), 0u);
}

TEST(Reproduce, UnevaluatedCellsAreRejected) {
    Rng rng(12);
    Individual i1 = individual_with({1.0}, rng), i2 = individual_with({1.0}, rng);
    i2.cells[0].fitness.reset();
    EXPECT_THROW(reproduce_individuals(i1, i2), ContractError);
}

// ---- gene silencing ----------------------------------------------------------

TEST(GeneSilencing, UncollapsedCellIsUnchanged) {
    Rng rng(13);
    const Cell c = make_cell(sample_uniform(rng), full_mask(false), 1.0);
    for (int t = 0; t < 1000; ++t) {
        const Cell out = gene_silencing(c, GsProbabilities::uniform(0.0), 1.0, rng);
        ASSERT_EQ(out.solution, c.solution);
        ASSERT_EQ(out.fitness, c.fitness);
    }
}

TEST(GeneSilencing, ClosedEpigeneticGateChangesNothing) {
    Rng rng(14);
    const Cell c = make_cell(sample_uniform(rng), full_mask(true), 1.0);
    for (int t = 0; t < 1000; ++t) ASSERT_EQ(gene_silencing(c, GsProbabilities::uniform(0.0), 0.0, rng).solution, c.solution);
}

TEST(GeneSilencing, OpenGateResamplesEveryGeneUniformly) {
    Rng rng(15);
    const Cell c = make_cell(sample_uniform(rng), full_mask(true));
    constexpr int n = 10000;
    std::array<std::vector<double>, kGeneCount> columns;
    for (int t = 0; t < n; ++t) {
        const Cell out = gene_silencing(c, GsProbabilities::uniform(0.0), 1.0, rng);
        ASSERT_EQ(check_invariants(out.solution), "");
        for (std::size_t j = 0; j < kGeneCount; ++j) columns[j].push_back(out.solution[j]);
    }
    for (const auto& spec : gene_specs()) {
        const auto& col = columns[spec.index];
        if (spec.is_categorical()) {
            std::array<int, 3> counts{};
            for (double v : col) ++counts[static_cast<std::size_t>(v)];
            for (int k : counts) EXPECT_NEAR(k / double(n), 1.0 / 3.0, 0.02);
            continue;
        }
        // The NPC pair is redrawn conditionally on the 5 m constraint, so its
        // marginal is only approximately uniform; the others are exact draws.
        EXPECT_LT(test::ks_uniform(col, spec.lo, spec.hi), 0.05) << spec.name;
        const auto changed = std::count_if(col.begin(), col.end(), [&](double v) { return v != c.solution[spec.index]; });
        EXPECT_EQ(changed, n) << spec.name;
    }
}

TEST(GeneSilencing, NeverTouchesUncollapsedPositions) {
    Rng rng(16);
    for (int t = 0; t < 10000; ++t) {
        const Cell c = make_cell(sample_uniform(rng), test::random_mask(rng));
        GsProbabilities probs;
        for (auto& p : probs.silencing) p = rng.uniform();
        const Cell out = gene_silencing(c, probs, rng.uniform(), rng);
        for (std::size_t j = 0; j < kGeneCount; ++j)
            if (!c.mask.collapsed(j)) ASSERT_EQ(out.solution[j], c.solution[j]) << "gene " << j;
    }
}

TEST(GeneSilencing, RealizedFrequencyMatchesTheGatingProduct) {
    Rng rng(17);
    GsProbabilities probs;
    for (std::size_t j = 0; j < kGeneCount; ++j) probs.silencing[j] = 0.05 + 0.09 * static_cast<double>(j);
    constexpr double pr_e = 0.3;
    constexpr int n = 20000;
    ExpressionTally tally;
    std::array<int, kGeneCount> changed{};
    const Cell c = make_cell(sample_uniform(rng), full_mask(true));
    for (int t = 0; t < n; ++t) {
        const Cell out = gene_silencing(c, probs, pr_e, rng, &tally);
        for (std::size_t j = 0; j < kGeneCount; ++j) changed[j] += out.solution[j] != c.solution[j];
    }
    EXPECT_EQ(tally.invocations, static_cast<std::uint64_t>(n));
    for (std::size_t j = 0; j < kGeneCount; ++j) {
        const double p = pr_e * (1.0 - probs.silencing[j]);
        EXPECT_NEAR(tally.expressed[j] / double(n), p, test::binomial_band(p, n)) << "gene " << j;
        EXPECT_EQ(tally.collapsed[j], static_cast<std::uint64_t>(n));
        EXPECT_NEAR(tally.predicted_expression_sum[j] / n, 1.0 - probs.silencing[j], 1e-12);
        // A resampled category equals the old one a third of the time.
        const double p_change = gene_specs()[j].is_categorical() ? p * 2.0 / 3.0 : p;
        EXPECT_NEAR(changed[j] / double(n), p_change, test::binomial_band(p_change, n)) << "gene " << j;
    }
}

TEST(GsProbabilities, ExpressionIsTheComplement) {
    std::array<double, kGeneCount> expr{};
    for (std::size_t j = 0; j < kGeneCount; ++j) expr[j] = 0.1 * static_cast<double>(j);
    const auto p = GsProbabilities::from_expression(expr);
    for (std::size_t j = 0; j < kGeneCount; ++j) EXPECT_DOUBLE_EQ(p.expression(j), expr[j]);
    EXPECT_TRUE(p.valid());
    GsProbabilities bad = GsProbabilities::uniform(0.5);
    bad.silencing[3] = 1.5;
    EXPECT_FALSE(bad.valid());
}

// ---- selection and replacement -------------------------------------------------

TEST(BinaryTournament, BetterOfTwoAlwaysWins) {
    Rng rng(18);
    const Population pop = population_with({0.5, 3.0}, rng);
    for (int t = 0; t < 1000; ++t) ASSERT_EQ(binary_tournament(pop, rng), 0u);
}

TEST(BinaryTournament, TiesAreACoinFlip) {
    Rng rng(19);
    const Population pop = population_with({1.0, 1.0}, rng);
    constexpr int n = 10000;
    int first = 0;
    for (int t = 0; t < n; ++t) first += binary_tournament(pop, rng) == 0;
    EXPECT_NEAR(first / double(n), 0.5, 0.02);
}

TEST(BinaryTournament, SelectionPressureMatchesPairEnumeration) {
    Rng rng(20);
    constexpr std::size_t T = 20;
    std::vector<double> fit(T);
    for (std::size_t i = 0; i < T; ++i) fit[i] = static_cast<double>((i * 7) % T);   // a permutation of ranks
    const Population pop = population_with(fit, rng);
    // Oracle: enumerate all ordered pairs of distinct individuals.
    std::vector<double> expected(T, 0.0);
    for (std::size_t a = 0; a < T; ++a)
        for (std::size_t b = 0; b < T; ++b)
            if (a != b) expected[fit[a] < fit[b] ? a : b] += 1.0 / static_cast<double>(T * (T - 1));
    for (std::size_t i = 0; i < T; ++i) {
        const double worse = static_cast<double>(std::count_if(fit.begin(), fit.end(), [&](double f) { return f > fit[i]; }));
        EXPECT_NEAR(expected[i], 2.0 * worse / static_cast<double>(T * (T - 1)), 1e-15);
    }
    constexpr int n = 200000;
    std::vector<int> wins(T, 0);
    for (int t = 0; t < n; ++t) ++wins[binary_tournament(pop, rng)];
    for (std::size_t i = 0; i < T; ++i)
        EXPECT_NEAR(wins[i] / double(n), expected[i], test::binomial_band(std::max(expected[i], 1e-3), n, 4.0)) << i;
}

TEST(BinaryTournament, NeedsTwoIndividuals) {
    Rng rng(21);
    EXPECT_THROW(binary_tournament(population_with({1.0}, rng), rng), ContractError);
}

TEST(ElitistReplacement, WorseOffspringAreDiscarded) {
    Rng rng(22);
    const Population old = population_with({1, 2, 3, 4}, rng);
    const Population off = population_with({5, 6, 7, 8}, rng);
    const Population next = elitist_replacement(old, off);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(next.individuals[i].cells[0].solution, old.individuals[i].cells[0].solution);
}

TEST(ElitistReplacement, BetterOffspringTakeOver) {
    Rng rng(23);
    const Population old = population_with({5, 6, 7, 8}, rng);
    const Population off = population_with({4, 3, 2, 1}, rng);
    const Population next = elitist_replacement(old, off);
    for (const auto& ind : next.individuals) EXPECT_LE(ind.fitness(), 4.0);
}

TEST(ElitistReplacement, KeepsExactlyTheSmallestAndPrefersOldOnTies) {
    Rng rng(24);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> a(10), b(10);
        for (auto& v : a) v = static_cast<double>(rng.index(8));
        for (auto& v : b) v = static_cast<double>(rng.index(8));
        const Population old = population_with(a, rng), off = population_with(b, rng);
        // Sort oracle over (fitness, source, index).
        std::vector<std::tuple<double, int, std::size_t>> pool;
        for (std::size_t i = 0; i < 10; ++i) pool.emplace_back(a[i], 0, i);
        for (std::size_t i = 0; i < 10; ++i) pool.emplace_back(b[i], 1, i);
        std::sort(pool.begin(), pool.end());
        const Population next = elitist_replacement(old, off);
        ASSERT_EQ(next.size(), 10u);
        for (std::size_t k = 0; k < 10; ++k) {
            const auto [f, src, i] = pool[k];
            const Population& from = src == 0 ? old : off;
            ASSERT_EQ(next.individuals[k].fitness(), f);
            ASSERT_EQ(next.individuals[k].cells[0].solution, from.individuals[i].cells[0].solution);
        }
    }
}

// ---- search loop -------------------------------------------------------------

TEST(RunEpiga, DefaultsGiveFiftyGenerations) {
    std::atomic<int> calls{0};
    const Evaluator eval = [&](const ScenarioGenome& g, std::uint64_t s) {
        ++calls;
        return sphere(g, s);
    };
    EpiGaConfig cfg;
    const SearchTrace trace = run_epiga(cfg, EqualProvider(), eval);
    EXPECT_EQ(trace.generations.size(), 50u);
    EXPECT_EQ(calls.load(), 1000);
    EXPECT_EQ(trace.generations.back().evaluations_used, 1000u);
    EXPECT_EQ(trace.expression.invocations, 980u);
}

TEST(RunEpiga, FlatLandscapeIsStable) {
    const Evaluator eval = [](const ScenarioGenome&, std::uint64_t) { return Evaluation{2.5, {}}; };
    EpiGaConfig cfg;
    cfg.max_evaluations = 200;
    const SearchTrace trace = run_epiga(cfg, EqualProvider(), eval);
    for (const auto& g : trace.generations) {
        EXPECT_EQ(g.fitness_best, 2.5);
        EXPECT_EQ(g.fitness_avg, 2.5);
    }
}

TEST(RunEpiga, BestFitnessNeverIncreases) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        EpiGaConfig cfg;
        cfg.seed = seed;
        cfg.epigenetic_prob = 0.3;
        const SearchTrace trace = run_epiga(cfg, EqualProvider(), sphere);
        for (std::size_t i = 1; i < trace.generations.size(); ++i)
            ASSERT_LE(trace.generations[i].fitness_best, trace.generations[i - 1].fitness_best);
        EXPECT_LT(trace.generations.back().fitness_best, trace.generations.front().fitness_best);
        EXPECT_EQ(trace.best_fitness, trace.generations.back().fitness_best);
    }
}

TEST(RunEpiga, MultiCellIndividualsSpendOneEvaluationPerCell) {
    std::atomic<int> calls{0};
    const Evaluator eval = [&](const ScenarioGenome& g, std::uint64_t s) {
        ++calls;
        return sphere(g, s);
    };
    EpiGaConfig cfg;
    cfg.cells_per_individual = 3;
    cfg.max_evaluations = 300;
    const SearchTrace trace = run_epiga(cfg, EqualProvider(), eval);
    EXPECT_LE(calls.load(), 300);
    EXPECT_EQ(static_cast<std::uint64_t>(calls.load()), trace.generations.back().evaluations_used);
    for (std::size_t i = 1; i < trace.generations.size(); ++i)
        ASSERT_LE(trace.generations[i].fitness_best, trace.generations[i - 1].fitness_best);
}

bool same_trace(const SearchTrace& a, const SearchTrace& b) {
    if (a.generations.size() != b.generations.size()) return false;
    for (std::size_t i = 0; i < a.generations.size(); ++i) {
        const auto& x = a.generations[i];
        const auto& y = b.generations[i];
        if (x.fitness_avg != y.fitness_avg || x.fitness_best != y.fitness_best || x.evaluations_used != y.evaluations_used)
            return false;
    }
    return a.best_genome == b.best_genome && a.expression.expressed == b.expression.expressed &&
           a.expression.collapsed == b.expression.collapsed;
}

TEST(RunEpiga, DeterministicAndThreadCountInvariant) {
    EpiGaConfig cfg;
    cfg.seed = 77;
    cfg.epigenetic_prob = 0.2;
    const SearchTrace a = run_epiga(cfg, EqualProvider(), sphere);
    const SearchTrace b = run_epiga(cfg, EqualProvider(), sphere);
    cfg.threads = 4;
    const SearchTrace c = run_epiga(cfg, EqualProvider(), sphere);
    EXPECT_TRUE(same_trace(a, b));
    EXPECT_TRUE(same_trace(a, c));
    cfg.seed = 78;
    EXPECT_FALSE(same_trace(a, run_epiga(cfg, EqualProvider(), sphere)));
}

TEST(RunEpiga, EvaluatorFailureAbortsWithPartialTrace) {
    std::atomic<int> calls{0};
    const Evaluator eval = [&](const ScenarioGenome& g, std::uint64_t s) {
        if (++calls > 70) throw std::runtime_error("simulator crashed");
        return sphere(g, s);
    };
    try {
        run_epiga(EpiGaConfig{}, EqualProvider(), eval);
        FAIL() << "expected SearchAborted";
    } catch (const SearchAborted& e) {
        EXPECT_NE(std::string(e.what()).find("simulator crashed"), std::string::npos);
        EXPECT_EQ(e.partial().generations.size(), 3u);
    }
}

TEST(RunEpiga, InvalidConfigIsRejected) {
    EpiGaConfig cfg;
    cfg.population_size = 7;
    EXPECT_THROW(run_epiga(cfg, EqualProvider(), sphere), ContractError);
    cfg = EpiGaConfig{};
    cfg.max_evaluations = 10;
    EXPECT_THROW(run_epiga(cfg, EqualProvider(), sphere), ContractError);
}

}  // namespace
}  // namespace episcen
