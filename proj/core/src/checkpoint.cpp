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

// Checkpoint text format, version 1:
//
//   episcen-checkpoint 1
//   context projected|raw
//   encoder_hidden <n>
//   tensor <name> <rows> <cols>
//   <rows * cols values, column-major, one per line, %.17g>
//   ...
//   end

#include <cstdio>
#include <fstream>
#include <sstream>

#include "episcen/attention.hpp"
#include "episcen/errors.hpp"

namespace episcen {

namespace {

constexpr int kCheckpointVersion = 1;

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& token, const std::filesystem::path& path) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(token, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != token.size()) throw InputError(path.string() + ": malformed number '" + token + "'");
    return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    return out;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
    const auto shapes = ModelParams::shapes(params.config);
    std::ofstream out = open_out(path);
    out << "episcen-checkpoint " << kCheckpointVersion << "\n";
    out << "context " << (params.config.context == ContextMode::Projected ? "projected" : "raw") << "\n";
    out << "encoder_hidden " << params.config.encoder_hidden << "\n";
    for (std::size_t i = 0; i < kParamCount; ++i) {
        const auto& t = params.tensors[i];
        if (t.rows() != shapes[i][0] || t.cols() != shapes[i][1])
            throw ContractError("save_checkpoint: tensor " + std::string(param_name(static_cast<Param>(i))) + " has the wrong shape");
        out << "tensor " << param_name(static_cast<Param>(i)) << " " << t.rows() << " " << t.cols() << "\n";
        for (Eigen::Index k = 0; k < t.size(); ++k) out << format_double(t.data()[k]) << "\n";
    }
    out << "end\n";
    if (!out) throw InputError("failed writing " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open checkpoint " + path.string() + " (create one with `episcen train-model`)");
    auto fail = [&](const std::string& what) { return InputError(path.string() + ": " + what); };

    std::string word;
    int version = 0;
    if (!(in >> word >> version) || word != "episcen-checkpoint") throw fail("not an episcen checkpoint");
    if (version != kCheckpointVersion) throw fail("unsupported checkpoint version " + std::to_string(version));

    ModelParams p;
    std::string mode;
    if (!(in >> word >> mode) || word != "context") throw fail("missing context line");
    if (mode == "projected")
        p.config.context = ContextMode::Projected;
    else if (mode == "raw")
        p.config.context = ContextMode::Raw;
    else
        throw fail("unknown context mode '" + mode + "'");
    if (!(in >> word >> p.config.encoder_hidden) || word != "encoder_hidden" || p.config.encoder_hidden < 1)
        throw fail("missing or invalid encoder_hidden line");

    const auto shapes = ModelParams::shapes(p.config);
    for (std::size_t i = 0; i < kParamCount; ++i) {
        std::string name;
        Eigen::Index rows = -1, cols = -1;
        if (!(in >> word >> name >> rows >> cols) || word != "tensor") throw fail("truncated tensor header");
        if (name != param_name(static_cast<Param>(i))) throw fail("expected tensor " + std::string(param_name(static_cast<Param>(i))) + ", found " + name);
        if (rows != shapes[i][0] || cols != shapes[i][1]) throw fail("shape mismatch for " + name);
        Eigen::MatrixXd t(rows, cols);
        std::string token;
        for (Eigen::Index k = 0; k < t.size(); ++k) {
            if (!(in >> token)) throw fail("truncated values for " + name);
            t.data()[k] = parse_double(token, path);
        }
        p.tensors[i] = std::move(t);
    }
    if (!(in >> word) || word != "end") throw fail("missing end marker");
    return p;
}

void write_dataset_csv(std::span<const TrainingSample> samples, const std::filesystem::path& path) {
    std::ofstream out = open_out(path);
    for (std::size_t i = 0; i < kFeatureCount; ++i) out << "f" << i << ",";
    for (const auto& spec : gene_specs()) out << spec.name << ",";
    out << "f_gt\n";
    for (const auto& s : samples) {
        for (double v : s.features) out << format_double(v) << ",";
        for (double v : s.values) out << format_double(v) << ",";
        out << format_double(s.target) << "\n";
    }
    if (!out) throw InputError("failed writing " + path.string());
}

std::vector<TrainingSample> read_dataset_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open dataset " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw InputError(path.string() + ": empty dataset file");
    std::vector<TrainingSample> out;
    constexpr std::size_t kColumns = kFeatureCount + kGeneCount + 1;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<double> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(parse_double(cell, path));
        if (cells.size() != kColumns)
            throw InputError(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(kColumns) + " columns");
        TrainingSample s;
        for (std::size_t i = 0; i < kFeatureCount; ++i) s.features[i] = cells[i];
        for (std::size_t i = 0; i < kGeneCount; ++i) s.values[i] = cells[kFeatureCount + i];
        s.target = cells.back();
        out.push_back(s);
    }
    return out;
}

}  // namespace episcen
