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

#include "episcen/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "episcen/errors.hpp"
#include "episcen/ga.hpp"
#include "episcen/rng.hpp"

namespace episcen {

std::string_view method_name(Method m) noexcept {
    switch (m) {
        case Method::EpiTester: return "epitester";
        case Method::Ga: return "ga";
        case Method::EpiTesterEq: return "epitester_eq";
    }
    return "?";
}

Method parse_method(std::string_view name) {
    for (Method m : {Method::EpiTester, Method::Ga, Method::EpiTesterEq})
        if (method_name(m) == name) return m;
    throw InputError("unknown method '" + std::string(name) + "' (expected epitester, ga or epitester_eq)");
}

bool method_needs_model(Method m) noexcept { return m == Method::EpiTester; }

void ExperimentPlan::validate() const {
    if (methods.empty() || layouts.empty()) throw InputError("plan needs at least one method and one layout");
    if (runs < 1) throw InputError("runs must be >= 1");
    if (reexec < 0) throw InputError("reexec must be >= 0");
    if (population_size < 2 || population_size % 2) throw InputError("population size must be even and >= 2");
    if (budget < population_size) throw InputError("budget must be >= the population size");
    if (stochastic && !(noise >= 0.0 && noise < 1.0)) throw InputError("noise must be in [0, 1)");
    if (threads < 1) throw InputError("threads must be >= 1");
}

SimConfig ExperimentPlan::sim_config() const { return stochastic ? SimConfig::stochastic(noise) : SimConfig{}; }

std::uint64_t run_seed(const ExperimentPlan& plan, LayoutId layout, int run) {
    return derive_seed(plan.seed, {static_cast<std::uint64_t>(layout), static_cast<std::uint64_t>(run)});
}

std::uint64_t reexec_seed(std::uint64_t run_seed, int exec) {
    return derive_seed(run_seed, {0x4ee0ULL, static_cast<std::uint64_t>(exec)});
}

Evaluator make_evaluator(LayoutId id, const SimConfig& sim) {
    const RouteLayout* route = &layout(id);
    return [route, sim](const ScenarioGenome& genome, std::uint64_t seed) {
        const SimOutcome out = run_episode(*route, genome, seed, sim);
        return Evaluation{fitness(out), std::vector<double>(out.features.begin(), out.features.end())};
    };
}

SearchTrace run_search(Method method, LayoutId layout_id, std::uint64_t seed, const ExperimentPlan& plan,
                       const ModelParams* model) {
    const Evaluator evaluator = make_evaluator(layout_id, plan.sim_config());
    SearchTrace trace;
    if (method == Method::Ga) {
        GaConfig cfg;
        cfg.population_size = plan.population_size;
        cfg.max_evaluations = plan.budget;
        cfg.seed = seed;
        trace = run_ga(cfg, evaluator);
    } else {
        EpiGaConfig cfg;
        cfg.population_size = plan.population_size;
        cfg.max_evaluations = plan.budget;
        cfg.seed = seed;
        if (method == Method::EpiTester) {
            if (!model) throw InputError("method epitester needs a trained model; run `episcen train-model` first");
            trace = run_epiga(cfg, AttentionProvider(*model), evaluator);
        } else {
            trace = run_epiga(cfg, EqualProvider(), evaluator);
        }
    }
    trace.method = std::string(method_name(method));
    return trace;
}

ExperimentResults run_experiment(const ExperimentPlan& plan, const ModelParams* model) {
    plan.validate();
    for (Method m : plan.methods)
        if (method_needs_model(m) && !model)
            throw InputError("method epitester needs a trained model checkpoint; create one with `episcen train-model`");

    ExperimentResults results;
    results.plan = plan;
    results.cells.resize(plan.cell_count());
    std::vector<std::vector<MetricRow>> rows(plan.cell_count());
    const SimConfig sim = plan.sim_config();

    std::size_t index = 0;
    for (Method m : plan.methods)
        for (LayoutId l : plan.layouts)
            for (int r = 0; r < plan.runs; ++r) results.cells[index++] = CellResult{m, l, r, run_seed(plan, l, r), {}};

    auto run_cell = [&](std::size_t i) {
        CellResult& cell = results.cells[i];
        cell.trace = run_search(cell.method, cell.layout, cell.seed, plan, model);
        for (int e = 0; e < plan.reexec; ++e) {
            const SimOutcome out = run_episode(layout(cell.layout), cell.trace.best_genome, reexec_seed(cell.seed, e), sim);
            rows[i].push_back(MetricRow{cell.method, cell.layout, cell.run, e, out.metrics});
        }
    };

    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(plan.cell_count());
    auto worker = [&] {
        for (std::size_t i = next++; i < results.cells.size(); i = next++) {
            try {
                run_cell(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (plan.threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < plan.threads; ++t) pool.emplace_back(worker);
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    for (auto& r : rows) results.rows.insert(results.rows.end(), r.begin(), r.end());
    return results;
}

namespace {

/// Groups items by (method, layout) keeping the order of first appearance.
template <typename T, typename Key>
std::vector<std::pair<std::pair<Method, LayoutId>, std::vector<const T*>>> group_by_cell(const std::vector<T>& items, Key key) {
    std::vector<std::pair<std::pair<Method, LayoutId>, std::vector<const T*>>> groups;
    for (const T& item : items) {
        const auto k = key(item);
        auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == k; });
        if (it == groups.end()) {
            groups.push_back({k, {}});
            it = groups.end() - 1;
        }
        it->second.push_back(&item);
    }
    return groups;
}

}  // namespace

std::vector<ConvergencePoint> convergence(const std::vector<CellResult>& cells) {
    std::vector<ConvergencePoint> out;
    const auto groups = group_by_cell(cells, [](const CellResult& c) { return std::pair{c.method, c.layout}; });
    for (const auto& [key, members] : groups) {
        std::size_t generations = 0;
        for (const CellResult* c : members) generations = std::max(generations, c->trace.generations.size());
        for (std::size_t g = 0; g < generations; ++g) {
            std::vector<double> avg, best;
            for (const CellResult* c : members) {
                if (g >= c->trace.generations.size()) continue;
                avg.push_back(c->trace.generations[g].fitness_avg);
                best.push_back(c->trace.generations[g].fitness_best);
            }
            out.push_back(ConvergencePoint{key.first, key.second, static_cast<int>(g), mean_ci95(avg), mean_ci95(best), avg.size()});
        }
    }
    return out;
}

std::string_view metric_name(MetricKind m) noexcept {
    switch (m) {
        case MetricKind::MD: return "MD";
        case MetricKind::CO: return "CO";
        case MetricKind::RC: return "RC";
        case MetricKind::IS: return "IS";
        case MetricKind::DS: return "DS";
    }
    return "?";
}

double metric_value(const Metrics& m, MetricKind kind) noexcept {
    switch (kind) {
        case MetricKind::MD: return m.md;
        case MetricKind::CO: return m.co;
        case MetricKind::RC: return m.rc;
        case MetricKind::IS: return m.is;
        case MetricKind::DS: return m.ds;
    }
    return 0.0;
}

bool lower_is_better(MetricKind kind) noexcept { return kind != MetricKind::CO; }

StatsReport compute_stats(const std::vector<MetricRow>& rows) {
    StatsReport report;
    const auto groups = group_by_cell(rows, [](const MetricRow& r) { return std::pair{r.method, r.layout}; });
    auto column = [](const std::vector<const MetricRow*>& members, MetricKind k) {
        std::vector<double> v;
        v.reserve(members.size());
        for (const MetricRow* r : members) v.push_back(metric_value(r->metrics, k));
        return v;
    };

    for (std::size_t i = 0; i < groups.size(); ++i) {
        for (std::size_t j = i + 1; j < groups.size(); ++j) {
            if (groups[i].first.second != groups[j].first.second) continue;
            for (MetricKind k : kAllMetrics) {
                const std::vector<double> a = column(groups[i].second, k);
                const std::vector<double> b = column(groups[j].second, k);
                PairStat s;
                s.a = groups[i].first.first;
                s.b = groups[j].first.first;
                s.layout = groups[i].first.second;
                s.metric = k;
                s.a12 = vargha_delaney_a12(a, b);
                s.test = mann_whitney_u(a, b);
                if (s.test.p >= kSignificance || s.a12 == 0.5)
                    s.verdict = "no difference";
                else
                    s.verdict = (s.a12 < 0.5) == lower_is_better(k) ? "a better" : "b better";
                report.pairs.push_back(std::move(s));
            }
        }
    }

    for (const auto& [key, members] : groups) {
        const std::vector<double> md = column(members, MetricKind::MD);
        for (MetricKind k : {MetricKind::CO, MetricKind::RC, MetricKind::IS, MetricKind::DS}) {
            CorrelationStat c{key.first, key.second, k, std::nullopt};
            try {
                c.result = spearman_rho(md, column(members, k));
            } catch (const InputError&) {
                c.result.reset();
            }
            report.correlations.push_back(c);
        }
    }
    return report;
}

std::vector<ExpressionProfileRow> report_expression_profile(const std::vector<CellResult>& cells) {
    std::vector<ExpressionProfileRow> out;
    auto summarize = [](Method method, std::optional<LayoutId> layout, const std::vector<const CellResult*>& members) {
        ExpressionTally total;
        for (const CellResult* c : members) total.merge(c->trace.expression);
        std::optional<ExpressionProfileRow> row;
        if (total.invocations == 0) return row;
        row.emplace();
        row->method = method;
        row->layout = layout;
        const auto n = static_cast<double>(total.invocations);
        for (std::size_t j = 0; j < kGeneCount; ++j) {
            GeneExpression& g = row->genes[j];
            g.gene = j;
            g.invocations = total.invocations;
            g.predicted = total.predicted_expression_sum[j] / n;
            std::vector<double> per_cell;
            for (const CellResult* c : members)
                if (c->trace.expression.invocations > 0)
                    per_cell.push_back(c->trace.expression.predicted_expression_sum[j] /
                                       static_cast<double>(c->trace.expression.invocations));
            g.predicted_ci = mean_ci95(per_cell);
            g.predicted_ci.mean = g.predicted;
            g.realized = static_cast<double>(total.expressed[j]) / n;
            g.realized_ci = 1.96 * std::sqrt(g.realized * (1.0 - g.realized) / n);
            g.collapsed_fraction = static_cast<double>(total.collapsed[j]) / n;
        }
        return row;
    };

    std::vector<Method> methods;
    for (const CellResult& c : cells)
        if (c.method != Method::Ga && std::find(methods.begin(), methods.end(), c.method) == methods.end())
            methods.push_back(c.method);
    const auto groups = group_by_cell(cells, [](const CellResult& c) { return std::pair{c.method, c.layout}; });
    for (Method m : methods) {
        std::vector<const CellResult*> pooled;
        for (const auto& [key, members] : groups) {
            if (key.first != m) continue;
            if (auto row = summarize(m, key.second, members)) out.push_back(*row);
            pooled.insert(pooled.end(), members.begin(), members.end());
        }
        if (auto row = summarize(m, std::nullopt, pooled)) out.push_back(*row);
    }
    return out;
}

}  // namespace episcen
