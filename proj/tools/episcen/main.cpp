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

// episcen command-line tool. Every flag can also be set in a TOML/INI file
// passed with --config (one section per subcommand); EPISCEN_SEED and
// EPISCEN_OUT_DIR override the config file, explicit flags override both.

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include <CLI11.hpp>

#include "episcen/attention.hpp"
#include "episcen/errors.hpp"
#include "episcen/experiment.hpp"

namespace fs = std::filesystem;
using namespace episcen;

namespace {

std::vector<LayoutId> parse_layouts(const std::vector<std::string>& names) {
    std::vector<LayoutId> out;
    for (const auto& n : names) {
        if (n == "all") {
            for (LayoutId id : all_layouts()) out.push_back(id);
            continue;
        }
        out.push_back(parse_layout(n));
    }
    return out;
}

std::vector<Method> parse_methods(const std::vector<std::string>& names) {
    std::vector<Method> out;
    for (const auto& n : names) {
        if (n == "all") {
            out.insert(out.end(), {Method::EpiTester, Method::Ga, Method::EpiTesterEq});
            continue;
        }
        out.push_back(parse_method(n));
    }
    return out;
}

struct TrainArgs {
    std::size_t samples = 20000;
    int epochs = 30;
    std::string out = "model.ckpt";
    std::uint64_t seed = 0;
    int batch_size = 64;
    double lr = 1e-3;
    double momentum = 0.9;
    std::string optimizer = "sgd";
    std::string context = "projected";
    std::vector<std::string> envs{"all"};
    std::string dataset_in;
    std::string dataset_out;
};

int cmd_train(const TrainArgs& a) {
    std::vector<TrainingSample> data;
    if (!a.dataset_in.empty()) {
        data = read_dataset_csv(a.dataset_in);
        std::printf("dataset: %zu samples from %s\n", data.size(), a.dataset_in.c_str());
    } else {
        const std::vector<LayoutId> layouts = parse_layouts(a.envs);
        DatasetResult ds = build_dataset(layouts, a.samples, a.seed);
        std::printf("dataset: %zu of %zu episodes kept (md <= %.1f m, acceptance %.3f)\n", ds.samples.size(), ds.attempted,
                    kDatasetMaxDistance, ds.acceptance_rate);
        data = std::move(ds.samples);
    }
    if (!a.dataset_out.empty()) write_dataset_csv(data, a.dataset_out);

    TrainHyper h;
    h.batch_size = a.batch_size;
    h.epochs = a.epochs;
    h.learning_rate = a.lr;
    h.momentum = a.momentum;
    h.seed = a.seed;
    if (a.optimizer == "sgd")
        h.optimizer = Optimizer::Sgd;
    else if (a.optimizer == "adam")
        h.optimizer = Optimizer::Adam;
    else
        throw InputError("unknown optimizer '" + a.optimizer + "' (expected sgd or adam)");
    if (a.context == "projected")
        h.model.context = ContextMode::Projected;
    else if (a.context == "raw")
        h.model.context = ContextMode::Raw;
    else
        throw InputError("unknown context mode '" + a.context + "' (expected projected or raw)");

    const TrainResult r = train(data, h);
    save_checkpoint(r.params, a.out);
    std::printf("trained %zu/%zu (train/test) samples for %d epochs: test MSE %.4f, MAE %.4f\n", r.train_size, r.test_size,
                a.epochs, r.test_mse, r.test_mae);
    std::printf("checkpoint written to %s\n", a.out.c_str());
    return 0;
}

struct SearchArgs {
    std::vector<std::string> methods{"epitester"};
    std::vector<std::string> envs{"env1"};
    int runs = 10;
    int budget = 1000;
    int reexec = 30;
    int population = 20;
    std::string model;
    std::string out = "results";
    std::uint64_t seed = 0;
    bool deterministic = false;
    double noise = 0.1;
    unsigned threads = 1;
};

int cmd_search(const SearchArgs& a) {
    ExperimentPlan plan;
    plan.methods = parse_methods(a.methods);
    plan.layouts = parse_layouts(a.envs);
    plan.runs = a.runs;
    plan.budget = a.budget;
    plan.reexec = a.reexec;
    plan.population_size = a.population;
    plan.seed = a.seed;
    plan.stochastic = !a.deterministic;
    plan.noise = a.noise;
    plan.threads = a.threads;
    plan.validate();

    std::optional<ModelParams> model;
    bool needs_model = false;
    for (Method m : plan.methods) needs_model = needs_model || method_needs_model(m);
    if (needs_model) {
        if (a.model.empty()) throw InputError("--model is required for epitester; create one with `episcen train-model`");
        model = load_checkpoint(a.model);
    }
    const ExperimentResults results = run_experiment(plan, model ? &*model : nullptr);
    write_experiment(results, a.out);

    for (const CellResult& c : results.cells) {
        const auto first = c.trace.first_generation_at_or_below(0.0);
        std::printf("%-12s %s run %2d  best MD %.3f  first collision gen %s\n", std::string(method_name(c.method)).c_str(),
                    std::string(layout_name(c.layout)).c_str(), c.run, c.trace.best_fitness,
                    first ? std::to_string(*first).c_str() : "-");
    }
    std::printf("%zu result rows written to %s\n", results.rows.size(), (fs::path(a.out) / "results.csv").string().c_str());
    return 0;
}

int cmd_stats(const std::string& in, const std::string& out) {
    const std::vector<MetricRow> rows = read_results_csv(fs::path(in) / "results.csv");
    const StatsReport report = compute_stats(rows);
    write_stats_csv(report, out);
    fs::path corr = out;
    corr.replace_filename(corr.stem().string() + "_correlations.csv");
    write_correlations_csv(report, corr);
    write_convergence_csv(convergence(read_cells(in)), fs::path(in) / "convergence.csv");
    std::printf("%zu pairwise comparisons written to %s\n", report.pairs.size(), out.c_str());
    std::printf("%zu correlations written to %s\n", report.correlations.size(), corr.string().c_str());
    return 0;
}

int cmd_replay(const std::string& trace_path) {
    const ReplayFile replay = read_replay(trace_path);
    const SimConfig sim = replay.noise > 0.0 ? SimConfig::stochastic(replay.noise) : SimConfig{};
    const Metrics stored = derive_metrics(replay.trace, replay.route_length, sim);
    const SimOutcome rerun = run_episode(layout(replay.layout), replay.genome, replay.seed, sim);

    std::printf("layout %s, %zu states, route %.1f m\n", std::string(layout_name(replay.layout)).c_str(), replay.trace.size(),
                replay.route_length);
    std::printf("MD %.4f  CO %d  RC %.2f  IS %.4f  DS %.2f  (ped %d, npc %d, static %d)\n", stored.md, stored.co, stored.rc,
                stored.is, stored.ds, stored.infractions.ped, stored.infractions.npc, stored.infractions.stat);

    bool same = rerun.trace.size() == replay.trace.size();
    for (std::size_t i = 0; same && i < rerun.trace.size(); ++i) {
        const EnvState& x = rerun.trace[i];
        const EnvState& y = replay.trace[i];
        same = x.av_x == y.av_x && x.av_y == y.av_y && x.av_speed == y.av_speed && x.ped.x == y.ped.x && x.ped.y == y.ped.y &&
               x.npc.x == y.npc.x && x.npc.y == y.npc.y;
    }
    const Metrics& m = rerun.metrics;
    same = same && m.md == stored.md && m.co == stored.co && m.infractions == stored.infractions;
    std::printf("re-simulation: %s\n", same ? "identical" : "DIFFERS from the recorded trace");
    return same ? 0 : 1;
}

int cmd_profile(const std::string& in, const std::string& out) {
    const auto rows = report_expression_profile(read_cells(in));
    const fs::path path = out.empty() ? fs::path(in) / "expression_profile.csv" : fs::path(out);
    write_expression_csv(rows, path);
    const auto names = encode_names();
    for (const ExpressionProfileRow& r : rows) {
        std::printf("%s / %s (%llu GS invocations)\n", std::string(method_name(r.method)).c_str(),
                    r.layout ? std::string(layout_name(*r.layout)).c_str() : "all",
                    static_cast<unsigned long long>(r.genes[0].invocations));
        std::printf("  %-14s %10s %12s\n", "gene", "Pr_ge", "Pr_ge'");
        for (const GeneExpression& g : r.genes)
            std::printf("  %-14s %10.4f %12.6f\n", std::string(names[g.gene]).c_str(), g.predicted, g.realized);
    }
    if (rows.empty()) std::printf("no gene-silencing activity recorded in %s\n", in.c_str());
    std::printf("profile written to %s\n", path.string().c_str());
    return 0;
}

bool flag_on_command_line(int argc, char** argv, const std::string& flag) {
    for (int i = 1; i < argc; ++i) {
        const std::string_view arg = argv[i];
        if (arg == flag || arg.rfind(flag + "=", 0) == 0) return true;
    }
    return false;
}

// CLI11 lets a config file win over an environment variable; here the
// environment must sit between the two, so it is applied after parsing.
template <class T>
void env_override(int argc, char** argv, const char* env, const std::string& flag, T& target) {
    const char* value = std::getenv(env);
    if (value == nullptr || *value == '\0' || flag_on_command_line(argc, argv, flag)) return;
    if constexpr (std::is_same_v<T, std::string>) {
        target = value;
    } else {
        try {
            std::size_t used = 0;
            target = std::stoull(value, &used);
            if (used != std::strlen(value)) throw std::invalid_argument(value);
        } catch (const std::exception&) {
            throw InputError(std::string(env) + " must be an unsigned integer, got '" + value + "'");
        }
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Scenario generation for autonomous-vehicle testing with an epigenetic algorithm"};
    app.set_config("--config", "", "TOML/INI file mirroring the command-line flags");
    app.require_subcommand(1);

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train-model", "Build a random-strategy dataset and train the attention model");
    train_cmd->add_option("--samples", train_args.samples, "Episodes to simulate for the dataset")->check(CLI::PositiveNumber);
    train_cmd->add_option("--epochs", train_args.epochs, "Training epochs")->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--out", train_args.out, "Checkpoint path");
    train_cmd->add_option("--seed", train_args.seed, "Seed (env EPISCEN_SEED)");
    train_cmd->add_option("--batch-size", train_args.batch_size, "Mini-batch size")->check(CLI::PositiveNumber);
    train_cmd->add_option("--lr", train_args.lr, "Learning rate");
    train_cmd->add_option("--momentum", train_args.momentum, "Momentum (Adam beta1)");
    train_cmd->add_option("--optimizer", train_args.optimizer, "sgd or adam");
    train_cmd->add_option("--context", train_args.context, "projected (106-wide O_attn) or raw (68-wide)");
    train_cmd->add_option("--env", train_args.envs, "Layouts for the dataset (env1..env4 or all)");
    train_cmd->add_option("--dataset-in", train_args.dataset_in, "Train on this dataset CSV instead of simulating");
    train_cmd->add_option("--dataset-out", train_args.dataset_out, "Also write the dataset CSV here");

    SearchArgs search_args;
    auto* search_cmd = app.add_subcommand("run-search", "Search scenarios and re-execute the best one of every run");
    search_cmd->add_option("--method", search_args.methods, "epitester, ga, epitester_eq or all");
    search_cmd->add_option("--env", search_args.envs, "env1..env4 or all");
    search_cmd->add_option("--runs", search_args.runs, "Runs per (method, layout)")->check(CLI::PositiveNumber);
    search_cmd->add_option("--budget", search_args.budget, "Evaluations per run")->check(CLI::PositiveNumber);
    search_cmd->add_option("--reexec", search_args.reexec, "Re-executions of each best scenario")->check(CLI::NonNegativeNumber);
    search_cmd->add_option("--population", search_args.population, "Population size");
    search_cmd->add_option("--model", search_args.model, "Model checkpoint (needed by epitester)");
    search_cmd->add_option("--out", search_args.out, "Output directory (env EPISCEN_OUT_DIR)");
    search_cmd->add_option("--seed", search_args.seed, "Base seed (env EPISCEN_SEED)");
    search_cmd->add_flag("--deterministic", search_args.deterministic, "Disable detection noise");
    search_cmd->add_option("--noise", search_args.noise, "Relative detection-range noise");
    search_cmd->add_option("--threads", search_args.threads, "Cells run concurrently")->check(CLI::PositiveNumber);

    std::string stats_in = "results", stats_out = "report.csv";
    auto* stats_cmd = app.add_subcommand("stats", "Pairwise tests, effect sizes and correlations from a results directory");
    stats_cmd->add_option("--in", stats_in, "Results directory (env EPISCEN_OUT_DIR)");
    stats_cmd->add_option("--out", stats_out, "Report CSV");

    std::string replay_path;
    auto* replay_cmd = app.add_subcommand("replay", "Re-derive metrics from a replay file and re-simulate it");
    replay_cmd->add_option("--trace", replay_path, "Replay CSV")->required();

    std::string profile_in = "results", profile_out;
    auto* profile_cmd = app.add_subcommand("expression-profile", "Predicted vs realized gene expression per method");
    profile_cmd->add_option("--in", profile_in, "Results directory (env EPISCEN_OUT_DIR)");
    profile_cmd->add_option("--out", profile_out, "Profile CSV (default: <in>/expression_profile.csv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        env_override(argc, argv, "EPISCEN_SEED", "--seed", train_args.seed);
        env_override(argc, argv, "EPISCEN_SEED", "--seed", search_args.seed);
        env_override(argc, argv, "EPISCEN_OUT_DIR", "--out", search_args.out);
        env_override(argc, argv, "EPISCEN_OUT_DIR", "--in", stats_in);
        env_override(argc, argv, "EPISCEN_OUT_DIR", "--in", profile_in);
        if (*train_cmd) return cmd_train(train_args);
        if (*search_cmd) return cmd_search(search_args);
        if (*stats_cmd) return cmd_stats(stats_in, stats_out);
        if (*replay_cmd) return cmd_replay(replay_path);
        if (*profile_cmd) return cmd_profile(profile_in, profile_out);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const SearchAborted& e) {
        std::cerr << "error: " << e.what() << " (" << e.partial().generations.size() << " generations completed)\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
