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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "episcen/errors.hpp"
#include "episcen/experiment.hpp"
#include "episcen_test/oracles.hpp"

namespace episcen {
namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "episcen_test_harness" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

ExperimentPlan small_plan() {
    ExperimentPlan plan;
    plan.methods = {Method::Ga};
    plan.layouts = {LayoutId::Env1};
    plan.runs = 2;
    plan.reexec = 3;
    plan.budget = 60;
    plan.seed = 5;
    return plan;
}

TEST(Methods, NamesRoundTrip) {
    for (Method m : {Method::EpiTester, Method::Ga, Method::EpiTesterEq}) EXPECT_EQ(parse_method(method_name(m)), m);
    EXPECT_THROW(parse_method("random"), InputError);
    EXPECT_TRUE(method_needs_model(Method::EpiTester));
    EXPECT_FALSE(method_needs_model(Method::EpiTesterEq));
}

TEST(Plan, ValidationAndCounting) {
    ExperimentPlan plan;
    EXPECT_EQ(plan.cell_count() * static_cast<std::size_t>(plan.reexec), 3600u);
    plan.runs = 0;
    EXPECT_THROW(plan.validate(), InputError);
    plan = ExperimentPlan{};
    plan.budget = 10;
    EXPECT_THROW(plan.validate(), InputError);
    plan = ExperimentPlan{};
    plan.methods.clear();
    EXPECT_THROW(plan.validate(), InputError);
}

TEST(RunExperiment, RowCountIsTheCombinatorialProduct) {
    const ExperimentResults r = run_experiment(small_plan(), nullptr);
    EXPECT_EQ(r.rows.size(), 6u);
    EXPECT_EQ(r.cells.size(), 2u);
    ExperimentPlan plan = small_plan();
    plan.methods = {Method::Ga, Method::EpiTesterEq};
    plan.layouts = {LayoutId::Env2, LayoutId::Env4};
    plan.reexec = 2;
    EXPECT_EQ(run_experiment(plan, nullptr).rows.size(), 2u * 2u * 2u * 2u);
}

TEST(RunExperiment, DeterministicEpisodesCollapseReexecutions) {
    ExperimentPlan plan = small_plan();
    plan.stochastic = false;
    plan.runs = 1;
    plan.reexec = 30;
    const ExperimentResults r = run_experiment(plan, nullptr);
    ASSERT_EQ(r.rows.size(), 30u);
    for (const MetricRow& row : r.rows) {
        EXPECT_EQ(row.metrics.md, r.rows[0].metrics.md);
        EXPECT_EQ(row.metrics.ds, r.rows[0].metrics.ds);
        EXPECT_EQ(row.metrics.co, r.rows[0].metrics.co);
    }
}

TEST(RunExperiment, MissingModelNamesTheTrainingStep) {
    ExperimentPlan plan = small_plan();
    plan.methods = {Method::EpiTester};
    try {
        run_experiment(plan, nullptr);
        FAIL() << "expected InputError";
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("train-model"), std::string::npos);
    }
}

TEST(RunExperiment, MethodsShareRunSeedsAndThreadsDoNotChangeResults) {
    ExperimentPlan plan = small_plan();
    plan.methods = {Method::Ga, Method::EpiTesterEq};
    plan.layouts = {LayoutId::Env1, LayoutId::Env3};
    const ExperimentResults a = run_experiment(plan, nullptr);
    plan.threads = 3;
    const ExperimentResults b = run_experiment(plan, nullptr);
    ASSERT_EQ(a.rows.size(), b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        EXPECT_EQ(a.rows[i].metrics.md, b.rows[i].metrics.md);
        EXPECT_EQ(a.rows[i].metrics.ds, b.rows[i].metrics.ds);
        EXPECT_EQ(a.rows[i].method, b.rows[i].method);
    }
    for (const CellResult& c : a.cells) EXPECT_EQ(c.seed, run_seed(plan, c.layout, c.run));
    EXPECT_EQ(a.cells[0].seed, a.cells[4].seed);   // ga env1 run0 and epitester_eq env1 run0
}

MetricRow row(Method m, LayoutId l, int exec, double md, int co) {
    MetricRow r{m, l, 0, exec, {}};
    r.metrics.md = md;
    r.metrics.co = co;
    r.metrics.rc = 50.0 + md;
    r.metrics.is = co ? 0.5 : 1.0;
    r.metrics.ds = r.metrics.rc * r.metrics.is;
    return r;
}

TEST(ComputeStats, DirectionAwareVerdicts) {
    std::vector<MetricRow> rows;
    for (int e = 0; e < 10; ++e) rows.push_back(row(Method::EpiTester, LayoutId::Env1, e, 0.1 * e, 1));
    for (int e = 0; e < 10; ++e) rows.push_back(row(Method::Ga, LayoutId::Env1, e, 5.0 + 0.1 * e, 0));
    const StatsReport report = compute_stats(rows);
    ASSERT_EQ(report.pairs.size(), 5u);
    for (const PairStat& p : report.pairs) {
        EXPECT_EQ(p.a, Method::EpiTester);
        EXPECT_LT(p.test.p, 0.05);
        // Lower MD, higher CO, lower RC/IS/DS are all wins for the tester.
        EXPECT_EQ(p.verdict, "a better") << metric_name(p.metric);
        EXPECT_TRUE(p.test.exact);
        EXPECT_NEAR(p.test.u, p.a12 * 100.0, 1e-12);
    }
    EXPECT_EQ(report.pairs[0].a12, 0.0);
    EXPECT_EQ(report.pairs[1].a12, 1.0);   // CO
}

TEST(ComputeStats, NoDifferenceAndUndefinedCorrelations) {
    std::vector<MetricRow> rows;
    for (int e = 0; e < 5; ++e) rows.push_back(row(Method::Ga, LayoutId::Env2, e, 0.0, 1));
    for (int e = 0; e < 5; ++e) rows.push_back(row(Method::EpiTesterEq, LayoutId::Env2, e, 0.0, 1));
    const StatsReport report = compute_stats(rows);
    for (const PairStat& p : report.pairs) EXPECT_EQ(p.verdict, "no difference");
    ASSERT_EQ(report.correlations.size(), 8u);
    for (const CorrelationStat& c : report.correlations) EXPECT_FALSE(c.result.has_value());
}

TEST(ComputeStats, CorrelationsOfMinimumDistance) {
    std::vector<MetricRow> rows;
    for (int e = 0; e < 12; ++e) rows.push_back(row(Method::Ga, LayoutId::Env1, e, e, e < 4 ? 1 : 0));
    const StatsReport report = compute_stats(rows);
    ASSERT_EQ(report.correlations.size(), 4u);
    EXPECT_EQ(report.correlations[0].metric, MetricKind::CO);
    EXPECT_LT(report.correlations[0].result->rho, -0.7);
    EXPECT_NEAR(report.correlations[1].result->rho, 1.0, 1e-12);   // RC = 50 + MD
}

TEST(ExpressionProfile, EqualProviderPredictsOneHalfAndRealizedStaysBelow) {
    ExperimentPlan plan = small_plan();
    plan.methods = {Method::EpiTesterEq, Method::Ga};
    plan.budget = 400;
    plan.reexec = 0;
    const ExperimentResults r = run_experiment(plan, nullptr);
    const auto rows = report_expression_profile(r.cells);
    ASSERT_EQ(rows.size(), 2u);   // env1 and the pooled row; the GA contributes nothing
    EXPECT_FALSE(rows[1].layout.has_value());
    for (const auto& prof : rows) {
        EXPECT_EQ(prof.method, Method::EpiTesterEq);
        for (const GeneExpression& g : prof.genes) {
            EXPECT_EQ(g.predicted, 0.5);
            const double n = static_cast<double>(g.invocations);
            const double bound = g.predicted * 0.01 * g.collapsed_fraction;
            EXPECT_LE(g.realized, bound + 3.0 * std::sqrt(bound * (1.0 - bound) / n) + 1e-12);
            EXPECT_LT(g.realized, g.predicted);
        }
    }
}

TEST(ExpressionProfile, EmptyInputGivesEmptyTable) {
    EXPECT_TRUE(report_expression_profile({}).empty());
    CellResult c;
    c.method = Method::EpiTesterEq;
    EXPECT_TRUE(report_expression_profile({c}).empty());
}

TEST(Convergence, MeanOverRunsPerGeneration) {
    CellResult a, b;
    a.method = b.method = Method::Ga;
    for (int g = 0; g < 3; ++g) {
        a.trace.generations.push_back({g, 4.0 - g, 2.0 - g * 0.5, 0});
        b.trace.generations.push_back({g, 6.0 - g, 4.0 - g * 0.5, 0});
    }
    const auto points = convergence({a, b});
    ASSERT_EQ(points.size(), 3u);
    EXPECT_EQ(points[1].fitness_avg.mean, 4.0);
    EXPECT_EQ(points[2].fitness_best.mean, 2.0);
    EXPECT_EQ(points[0].runs, 2u);
}

TEST(Persistence, ResultsRoundTripAndReplayReproducesMetrics) {
    ExperimentPlan plan = small_plan();
    plan.methods = {Method::Ga, Method::EpiTesterEq};
    const ExperimentResults r = run_experiment(plan, nullptr);
    const fs::path dir = fresh_dir("roundtrip");
    write_experiment(r, dir);
    for (const char* f : {"results.csv", "traces.csv", "expression.csv", "best.csv", "convergence.csv", "plan.json"})
        EXPECT_TRUE(fs::exists(dir / f)) << f;

    const auto rows = read_results_csv(dir / "results.csv");
    ASSERT_EQ(rows.size(), r.rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(rows[i].metrics.md, r.rows[i].metrics.md);
        EXPECT_EQ(rows[i].metrics.ds, r.rows[i].metrics.ds);
        EXPECT_EQ(rows[i].layout, r.rows[i].layout);
    }
    const auto cells = read_cells(dir);
    ASSERT_EQ(cells.size(), r.cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
        EXPECT_EQ(cells[i].trace.generations.size(), r.cells[i].trace.generations.size());
        EXPECT_EQ(cells[i].trace.expression.expressed, r.cells[i].trace.expression.expressed);
    }

    const ReplayFile replay = read_replay(dir / "replays" / "ga_env1_run1.csv");
    EXPECT_EQ(replay.genome, r.cells[1].trace.best_genome);
    const SimConfig sim = plan.sim_config();
    const SimOutcome again = run_episode(layout(replay.layout), replay.genome, replay.seed, sim);
    const Metrics stored = derive_metrics(replay.trace, replay.route_length, sim);
    EXPECT_EQ(stored.md, again.metrics.md);
    EXPECT_EQ(stored.ds, again.metrics.ds);
    EXPECT_EQ(replay.trace.size(), again.trace.size());

    // Writing the same results twice gives identical bytes.
    const fs::path dir2 = fresh_dir("roundtrip2");
    write_experiment(r, dir2);
    EXPECT_EQ(slurp(dir / "results.csv"), slurp(dir2 / "results.csv"));
}

TEST(Persistence, ReportsAreWritten) {
    std::vector<MetricRow> rows;
    for (int e = 0; e < 6; ++e) rows.push_back(row(Method::EpiTester, LayoutId::Env1, e, 0.5 * e, e % 2));
    for (int e = 0; e < 6; ++e) rows.push_back(row(Method::Ga, LayoutId::Env1, e, 1.0 + e, 0));
    const StatsReport report = compute_stats(rows);
    const fs::path dir = fresh_dir("reports");
    write_stats_csv(report, dir / "report.csv");
    write_correlations_csv(report, dir / "corr.csv");
    const std::string stats = slurp(dir / "report.csv");
    EXPECT_EQ(stats.substr(0, stats.find('\n')), "pair,env,metric,A12,U,p,exact,significant,verdict");
    EXPECT_NE(stats.find("epitester_vs_ga,env1,MD"), std::string::npos);
    EXPECT_NE(slurp(dir / "corr.csv").find("undefined"), std::string::npos);   // ga CO column is constant
}

TEST(FormatReal, RoundTrips) {
    Rng rng(6);
    for (int i = 0; i < 1000; ++i) {
        const double v = rng.uniform(-1e6, 1e6) * std::pow(10.0, static_cast<double>(rng.index(20)) - 10.0);
        EXPECT_EQ(std::stod(format_real(v)), v);
    }
    EXPECT_EQ(format_real(0.5), "0.5");
}

}  // namespace
}  // namespace episcen
