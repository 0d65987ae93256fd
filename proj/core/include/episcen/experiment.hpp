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

// Experiment orchestration: search every (method, layout, run) cell, re-execute
// the best scenario, and turn the stored results into reports.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "episcen/attention.hpp"
#include "episcen/epiga.hpp"
#include "episcen/simenv.hpp"
#include "episcen/stats.hpp"

namespace episcen {

enum class Method { EpiTester, Ga, EpiTesterEq };

std::string_view method_name(Method m) noexcept;
/// Parses "epitester", "ga" or "epitester_eq"; throws InputError otherwise.
Method parse_method(std::string_view name);
bool method_needs_model(Method m) noexcept;

struct ExperimentPlan {
    std::vector<Method> methods{Method::EpiTester, Method::Ga, Method::EpiTesterEq};
    std::vector<LayoutId> layouts{LayoutId::Env1, LayoutId::Env2, LayoutId::Env3, LayoutId::Env4};
    int runs = 10;
    int reexec = 30;
    int budget = 1000;
    int population_size = 20;
    std::uint64_t seed = 0;
    /// Detection noise on the episodes; false gives fully deterministic episodes.
    bool stochastic = true;
    double noise = 0.1;
    /// Cells executed concurrently; output order is fixed by cell index.
    unsigned threads = 1;

    void validate() const;
    SimConfig sim_config() const;
    std::size_t cell_count() const noexcept { return methods.size() * layouts.size() * static_cast<std::size_t>(runs); }
};

/// Search seed of a (layout, run) pair; shared by every method so they start from the same population.
std::uint64_t run_seed(const ExperimentPlan& plan, LayoutId layout, int run);
/// Episode seed of re-execution `exec` of a run's best scenario.
std::uint64_t reexec_seed(std::uint64_t run_seed, int exec);

/// Evaluator over one layout: fitness = minimum distance, state = initial-state features.
Evaluator make_evaluator(LayoutId layout, const SimConfig& sim);

struct MetricRow {
    Method method = Method::EpiTester;
    LayoutId layout = LayoutId::Env1;
    int run = 0;
    int exec = 0;
    Metrics metrics;
};

struct CellResult {
    Method method = Method::EpiTester;
    LayoutId layout = LayoutId::Env1;
    int run = 0;
    std::uint64_t seed = 0;
    SearchTrace trace;
};

struct ExperimentResults {
    ExperimentPlan plan;
    std::vector<CellResult> cells;
    std::vector<MetricRow> rows;
};

/// Runs one search cell.
SearchTrace run_search(Method method, LayoutId layout, std::uint64_t seed, const ExperimentPlan& plan,
                       const ModelParams* model);

/// Runs the whole plan. Throws InputError naming `train-model` when a method
/// needs the model and none is given.
ExperimentResults run_experiment(const ExperimentPlan& plan, const ModelParams* model);

// ---- reports ---------------------------------------------------------------

struct ConvergencePoint {
    Method method = Method::EpiTester;
    LayoutId layout = LayoutId::Env1;
    int generation = 0;
    MeanCi fitness_avg;
    MeanCi fitness_best;
    std::size_t runs = 0;
};

/// Mean and 95% CI of fitness_avg and fitness_best per generation, over runs.
std::vector<ConvergencePoint> convergence(const std::vector<CellResult>& cells);

enum class MetricKind { MD, CO, RC, IS, DS };
inline constexpr std::array<MetricKind, 5> kAllMetrics{MetricKind::MD, MetricKind::CO, MetricKind::RC, MetricKind::IS,
                                                       MetricKind::DS};
std::string_view metric_name(MetricKind m) noexcept;
double metric_value(const Metrics& m, MetricKind kind) noexcept;
/// Direction from the tester's point of view: only CO is better when higher.
bool lower_is_better(MetricKind kind) noexcept;

struct PairStat {
    Method a = Method::EpiTester;
    Method b = Method::Ga;
    LayoutId layout = LayoutId::Env1;
    MetricKind metric = MetricKind::MD;
    double a12 = 0.5;
    MannWhitney test;
    /// "a better", "b better" or "no difference" at the 0.05 level.
    std::string verdict;
};

struct CorrelationStat {
    Method method = Method::EpiTester;
    LayoutId layout = LayoutId::Env1;
    MetricKind metric = MetricKind::CO;
    /// Empty when rho is undefined (a constant column).
    std::optional<Spearman> result;
};

struct StatsReport {
    std::vector<PairStat> pairs;
    std::vector<CorrelationStat> correlations;
};

StatsReport compute_stats(const std::vector<MetricRow>& rows);

struct GeneExpression {
    std::size_t gene = 0;
    std::uint64_t invocations = 0;
    /// Mean provider expression probability over all GS invocations.
    double predicted = 0.0;
    MeanCi predicted_ci;
    /// Realized change frequency: expressed / invocations.
    double realized = 0.0;
    double realized_ci = 0.0;
    /// Fraction of invocations in which the gene was collapsed.
    double collapsed_fraction = 0.0;
};

struct ExpressionProfileRow {
    Method method = Method::EpiTester;
    std::optional<LayoutId> layout;   // empty = all layouts pooled
    std::array<GeneExpression, kGeneCount> genes{};
};

/// Per-gene predicted and realized expression for every epiGA method, per layout
/// and pooled. Cells without GS invocations contribute nothing.
std::vector<ExpressionProfileRow> report_expression_profile(const std::vector<CellResult>& cells);

// ---- persistence -------------------------------------------------------------

/// Writes results.csv, traces.csv, expression.csv, best.csv, convergence.csv,
/// plan.json and a replay file of every cell's best scenario under `dir`.
void write_experiment(const ExperimentResults& results, const std::filesystem::path& dir);

std::vector<MetricRow> read_results_csv(const std::filesystem::path& path);
/// Reads traces.csv and expression.csv back into cells (trace generations and tallies only).
std::vector<CellResult> read_cells(const std::filesystem::path& dir);

void write_stats_csv(const StatsReport& report, const std::filesystem::path& path);
void write_correlations_csv(const StatsReport& report, const std::filesystem::path& path);
void write_convergence_csv(const std::vector<ConvergencePoint>& points, const std::filesystem::path& path);
void write_expression_csv(const std::vector<ExpressionProfileRow>& rows, const std::filesystem::path& path);

struct ReplayFile {
    LayoutId layout = LayoutId::Env1;
    ScenarioGenome genome;
    std::uint64_t seed = 0;
    double noise = 0.0;
    double route_length = 0.0;
    std::vector<EnvState> trace;
};

void write_replay(const std::filesystem::path& path, LayoutId layout, const ScenarioGenome& genome, std::uint64_t seed,
                  const SimConfig& sim, const SimOutcome& outcome);
ReplayFile read_replay(const std::filesystem::path& path);

/// Fixed-format real for CSV output: round-trippable and locale-independent.
std::string format_real(double v);

}  // namespace episcen
