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

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "episcen/errors.hpp"
#include "episcen/experiment.hpp"

namespace episcen {

std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

namespace fs = std::filesystem;

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    return out;
}

void finish(std::ofstream& out, const fs::path& path) {
    out.flush();
    if (!out) throw InputError("failed writing " + path.string());
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

/// Row-oriented CSV reader keyed by the header.
class CsvTable {
public:
    explicit CsvTable(const fs::path& path) : path_(path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw InputError("cannot open " + path.string());
        std::string line;
        while (std::getline(in, line) && !line.empty() && line[0] == '#') comments_.push_back(line);
        if (line.empty()) throw InputError(path.string() + ": missing header");
        header_ = split(line);
        std::size_t line_no = comments_.size() + 1;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            auto cells = split(line);
            if (cells.size() != header_.size())
                throw InputError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                                 std::to_string(header_.size()) + " columns, found " + std::to_string(cells.size()));
            rows_.push_back(std::move(cells));
        }
    }

    std::size_t size() const noexcept { return rows_.size(); }
    const std::vector<std::string>& comments() const noexcept { return comments_; }

    const std::string& text(std::size_t row, std::string_view column) const { return rows_[row][index(column)]; }

    double real(std::size_t row, std::string_view column) const {
        const std::string& s = text(row, column);
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != s.size() || s.empty())
            throw InputError(path_.string() + ": column " + std::string(column) + " has non-numeric value '" + s + "'");
        return v;
    }

    std::int64_t integer(std::size_t row, std::string_view column) const {
        const double v = real(row, column);
        return static_cast<std::int64_t>(v);
    }

    std::uint64_t unsigned_integer(std::size_t row, std::string_view column) const {
        const std::string& s = text(row, column);
        try {
            std::size_t used = 0;
            const auto v = std::stoull(s, &used);
            if (used == s.size()) return v;
        } catch (const std::exception&) {
        }
        throw InputError(path_.string() + ": column " + std::string(column) + " has invalid integer '" + s + "'");
    }

private:
    std::size_t index(std::string_view column) const {
        for (std::size_t i = 0; i < header_.size(); ++i)
            if (header_[i] == column) return i;
        throw InputError(path_.string() + ": missing column " + std::string(column));
    }

    fs::path path_;
    std::vector<std::string> comments_;
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

std::string cell_name(Method m, LayoutId l, int run) {
    return std::string(method_name(m)) + "_" + std::string(layout_name(l)) + "_run" + std::to_string(run);
}

void write_actor_header(std::ostream& out, const char* prefix) {
    for (const char* f : {"present", "x", "y", "vx", "vy", "lateral_offset", "lane", "distance"}) out << "," << prefix << "_" << f;
}

void write_actor(std::ostream& out, const ActorState& a) {
    out << "," << (a.present ? 1 : 0) << "," << format_real(a.x) << "," << format_real(a.y) << "," << format_real(a.vx) << ","
        << format_real(a.vy) << "," << format_real(a.lateral_offset) << "," << a.lane << "," << format_real(a.distance);
}

ActorState read_actor(const CsvTable& t, std::size_t row, const std::string& p) {
    ActorState a;
    a.present = t.integer(row, p + "_present") != 0;
    a.x = t.real(row, p + "_x");
    a.y = t.real(row, p + "_y");
    a.vx = t.real(row, p + "_vx");
    a.vy = t.real(row, p + "_vy");
    a.lateral_offset = t.real(row, p + "_lateral_offset");
    a.lane = static_cast<int>(t.integer(row, p + "_lane"));
    a.distance = t.real(row, p + "_distance");
    return a;
}

}  // namespace

void write_experiment(const ExperimentResults& results, const fs::path& dir) {
    fs::create_directories(dir);
    const ExperimentPlan& plan = results.plan;

    {
        const fs::path path = dir / "results.csv";
        std::ofstream out = open_out(path);
        out << "method,env,run,exec,MD,CO,RC,IS,DS\n";
        for (const MetricRow& r : results.rows)
            out << method_name(r.method) << "," << layout_name(r.layout) << "," << r.run << "," << r.exec << ","
                << format_real(r.metrics.md) << "," << r.metrics.co << "," << format_real(r.metrics.rc) << ","
                << format_real(r.metrics.is) << "," << format_real(r.metrics.ds) << "\n";
        finish(out, path);
    }
    {
        const fs::path path = dir / "traces.csv";
        std::ofstream out = open_out(path);
        out << "method,env,run,seed,generation,fitness_avg,fitness_best,evaluations_used\n";
        for (const CellResult& c : results.cells)
            for (const GenerationRecord& g : c.trace.generations)
                out << method_name(c.method) << "," << layout_name(c.layout) << "," << c.run << "," << c.seed << ","
                    << g.generation << "," << format_real(g.fitness_avg) << "," << format_real(g.fitness_best) << ","
                    << g.evaluations_used << "\n";
        finish(out, path);
    }
    {
        const fs::path path = dir / "expression.csv";
        std::ofstream out = open_out(path);
        out << "method,env,run,gene,invocations,collapsed,expressed,predicted_sum\n";
        const auto names = encode_names();
        for (const CellResult& c : results.cells) {
            const ExpressionTally& t = c.trace.expression;
            for (std::size_t j = 0; j < kGeneCount; ++j)
                out << method_name(c.method) << "," << layout_name(c.layout) << "," << c.run << "," << names[j] << ","
                    << t.invocations << "," << t.collapsed[j] << "," << t.expressed[j] << ","
                    << format_real(t.predicted_expression_sum[j]) << "\n";
        }
        finish(out, path);
    }
    {
        const fs::path path = dir / "best.csv";
        std::ofstream out = open_out(path);
        out << "method,env,run,seed,best_fitness,first_collision_generation";
        for (auto name : encode_names()) out << "," << name;
        out << "\n";
        for (const CellResult& c : results.cells) {
            const auto first = c.trace.first_generation_at_or_below(0.0);
            out << method_name(c.method) << "," << layout_name(c.layout) << "," << c.run << "," << c.seed << ","
                << format_real(c.trace.best_fitness) << "," << (first ? std::to_string(*first) : std::string("none"));
            for (double v : c.trace.best_genome.values) out << "," << format_real(v);
            out << "\n";
        }
        finish(out, path);
    }
    write_convergence_csv(convergence(results.cells), dir / "convergence.csv");
    {
        nlohmann::ordered_json j;
        j["methods"] = nlohmann::json::array();
        for (Method m : plan.methods) j["methods"].push_back(method_name(m));
        j["envs"] = nlohmann::json::array();
        for (LayoutId l : plan.layouts) j["envs"].push_back(layout_name(l));
        j["runs"] = plan.runs;
        j["reexec"] = plan.reexec;
        j["budget"] = plan.budget;
        j["population_size"] = plan.population_size;
        j["seed"] = plan.seed;
        j["stochastic"] = plan.stochastic;
        j["noise"] = plan.noise;
        const fs::path path = dir / "plan.json";
        std::ofstream out = open_out(path);
        out << j.dump(2) << "\n";
        finish(out, path);
    }
    const SimConfig sim = plan.sim_config();
    for (const CellResult& c : results.cells) {
        const std::uint64_t seed = reexec_seed(c.seed, 0);
        const SimOutcome outcome = run_episode(layout(c.layout), c.trace.best_genome, seed, sim);
        write_replay(dir / "replays" / (cell_name(c.method, c.layout, c.run) + ".csv"), c.layout, c.trace.best_genome, seed,
                     sim, outcome);
    }
}

std::vector<MetricRow> read_results_csv(const fs::path& path) {
    const CsvTable t(path);
    std::vector<MetricRow> rows;
    rows.reserve(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        MetricRow r;
        r.method = parse_method(t.text(i, "method"));
        r.layout = parse_layout(t.text(i, "env"));
        r.run = static_cast<int>(t.integer(i, "run"));
        r.exec = static_cast<int>(t.integer(i, "exec"));
        r.metrics.md = t.real(i, "MD");
        r.metrics.co = static_cast<int>(t.integer(i, "CO"));
        r.metrics.rc = t.real(i, "RC");
        r.metrics.is = t.real(i, "IS");
        r.metrics.ds = t.real(i, "DS");
        rows.push_back(r);
    }
    return rows;
}

std::vector<CellResult> read_cells(const fs::path& dir) {
    std::vector<CellResult> cells;
    std::map<std::string, std::size_t> index;
    auto cell_for = [&](Method m, LayoutId l, int run) -> CellResult& {
        const std::string key = cell_name(m, l, run);
        auto it = index.find(key);
        if (it == index.end()) {
            it = index.emplace(key, cells.size()).first;
            cells.push_back(CellResult{m, l, run, 0, {}});
            cells.back().trace.method = std::string(method_name(m));
        }
        return cells[it->second];
    };

    const CsvTable traces(dir / "traces.csv");
    for (std::size_t i = 0; i < traces.size(); ++i) {
        CellResult& c = cell_for(parse_method(traces.text(i, "method")), parse_layout(traces.text(i, "env")),
                                 static_cast<int>(traces.integer(i, "run")));
        c.seed = traces.unsigned_integer(i, "seed");
        GenerationRecord g;
        g.generation = static_cast<int>(traces.integer(i, "generation"));
        g.fitness_avg = traces.real(i, "fitness_avg");
        g.fitness_best = traces.real(i, "fitness_best");
        g.evaluations_used = traces.unsigned_integer(i, "evaluations_used");
        c.trace.generations.push_back(g);
    }

    const CsvTable expr(dir / "expression.csv");
    const auto names = encode_names();
    for (std::size_t i = 0; i < expr.size(); ++i) {
        CellResult& c = cell_for(parse_method(expr.text(i, "method")), parse_layout(expr.text(i, "env")),
                                 static_cast<int>(expr.integer(i, "run")));
        const std::string& gene = expr.text(i, "gene");
        std::size_t j = 0;
        while (j < kGeneCount && names[j] != gene) ++j;
        if (j == kGeneCount) throw InputError((dir / "expression.csv").string() + ": unknown gene '" + gene + "'");
        ExpressionTally& t = c.trace.expression;
        t.invocations = expr.unsigned_integer(i, "invocations");
        t.collapsed[j] = expr.unsigned_integer(i, "collapsed");
        t.expressed[j] = expr.unsigned_integer(i, "expressed");
        t.predicted_expression_sum[j] = expr.real(i, "predicted_sum");
    }
    return cells;
}

void write_stats_csv(const StatsReport& report, const fs::path& path) {
    std::ofstream out = open_out(path);
    out << "pair,env,metric,A12,U,p,exact,significant,verdict\n";
    for (const PairStat& s : report.pairs)
        out << method_name(s.a) << "_vs_" << method_name(s.b) << "," << layout_name(s.layout) << "," << metric_name(s.metric)
            << "," << format_real(s.a12) << "," << format_real(s.test.u) << "," << format_real(s.test.p) << ","
            << (s.test.exact ? 1 : 0) << "," << (s.test.p < kSignificance ? 1 : 0) << "," << s.verdict << "\n";
    finish(out, path);
}

void write_correlations_csv(const StatsReport& report, const fs::path& path) {
    std::ofstream out = open_out(path);
    out << "method,env,metric,rho,p,magnitude\n";
    for (const CorrelationStat& c : report.correlations) {
        out << method_name(c.method) << "," << layout_name(c.layout) << ",MD~" << metric_name(c.metric) << ",";
        if (c.result)
            out << format_real(c.result->rho) << "," << format_real(c.result->p) << "," << magnitude_name(c.result->magnitude);
        else
            out << "undefined,undefined,undefined";
        out << "\n";
    }
    finish(out, path);
}

void write_convergence_csv(const std::vector<ConvergencePoint>& points, const fs::path& path) {
    std::ofstream out = open_out(path);
    out << "method,env,generation,runs,fitness_avg_mean,fitness_avg_ci95,fitness_best_mean,fitness_best_ci95\n";
    for (const ConvergencePoint& p : points)
        out << method_name(p.method) << "," << layout_name(p.layout) << "," << p.generation << "," << p.runs << ","
            << format_real(p.fitness_avg.mean) << "," << format_real(p.fitness_avg.half_width) << ","
            << format_real(p.fitness_best.mean) << "," << format_real(p.fitness_best.half_width) << "\n";
    finish(out, path);
}

void write_expression_csv(const std::vector<ExpressionProfileRow>& rows, const fs::path& path) {
    std::ofstream out = open_out(path);
    out << "method,env,gene,invocations,pr_ge,pr_ge_ci95,pr_ge_realized,pr_ge_realized_ci95,collapsed_fraction\n";
    const auto names = encode_names();
    for (const ExpressionProfileRow& r : rows)
        for (const GeneExpression& g : r.genes)
            out << method_name(r.method) << "," << (r.layout ? layout_name(*r.layout) : std::string_view("all")) << ","
                << names[g.gene] << "," << g.invocations << "," << format_real(g.predicted) << ","
                << format_real(g.predicted_ci.half_width) << "," << format_real(g.realized) << ","
                << format_real(g.realized_ci) << "," << format_real(g.collapsed_fraction) << "\n";
    finish(out, path);
}

void write_replay(const fs::path& path, LayoutId layout_id, const ScenarioGenome& genome, std::uint64_t seed,
                  const SimConfig& sim, const SimOutcome& outcome) {
    std::ofstream out = open_out(path);
    out << "# episcen replay 1\n";
    out << "# layout " << layout_name(layout_id) << "\n";
    out << "# seed " << seed << "\n";
    out << "# noise " << format_real(sim.detection_noise) << "\n";
    out << "# route_length " << format_real(outcome.route_length) << "\n";
    out << "# genome";
    for (double v : genome.values) out << " " << format_real(v);
    out << "\n";
    out << "t,av_x,av_y,av_heading,av_speed,av_progress,av_lateral";
    write_actor_header(out, "ped");
    write_actor_header(out, "npc");
    write_actor_header(out, "traffic");
    out << ",sun_altitude,fog_density,static_clearance,detection_range\n";
    for (const EnvState& s : outcome.trace) {
        out << format_real(s.t) << "," << format_real(s.av_x) << "," << format_real(s.av_y) << "," << format_real(s.av_heading)
            << "," << format_real(s.av_speed) << "," << format_real(s.av_progress) << "," << format_real(s.av_lateral);
        write_actor(out, s.ped);
        write_actor(out, s.npc);
        write_actor(out, s.traffic);
        out << "," << format_real(s.sun_altitude) << "," << format_real(s.fog_density) << ","
            << format_real(s.static_clearance) << "," << format_real(s.detection_range) << "\n";
    }
    finish(out, path);
}

ReplayFile read_replay(const fs::path& path) {
    const CsvTable t(path);
    ReplayFile r;
    bool has_layout = false, has_genome = false, has_seed = false;
    for (const std::string& line : t.comments()) {
        std::istringstream ss(line.substr(1));
        std::string key;
        ss >> key;
        if (key == "layout") {
            std::string name;
            ss >> name;
            r.layout = parse_layout(name);
            has_layout = true;
        } else if (key == "seed") {
            has_seed = static_cast<bool>(ss >> r.seed);
        } else if (key == "noise") {
            ss >> r.noise;
        } else if (key == "route_length") {
            ss >> r.route_length;
        } else if (key == "genome") {
            std::size_t n = 0;
            while (n < kGeneCount && ss >> r.genome.values[n]) ++n;
            has_genome = n == kGeneCount;
        }
    }
    if (!has_layout || !has_genome || !has_seed) throw InputError(path.string() + ": replay header needs layout, seed and genome");
    validate(r.genome);
    for (std::size_t i = 0; i < t.size(); ++i) {
        EnvState s;
        s.t = t.real(i, "t");
        s.av_x = t.real(i, "av_x");
        s.av_y = t.real(i, "av_y");
        s.av_heading = t.real(i, "av_heading");
        s.av_speed = t.real(i, "av_speed");
        s.av_progress = t.real(i, "av_progress");
        s.av_lateral = t.real(i, "av_lateral");
        s.ped = read_actor(t, i, "ped");
        s.npc = read_actor(t, i, "npc");
        s.traffic = read_actor(t, i, "traffic");
        s.sun_altitude = t.real(i, "sun_altitude");
        s.fog_density = t.real(i, "fog_density");
        s.static_clearance = t.real(i, "static_clearance");
        s.detection_range = t.real(i, "detection_range");
        r.trace.push_back(s);
    }
    if (r.trace.empty()) throw InputError(path.string() + ": replay has no states");
    return r;
}

}  // namespace episcen
