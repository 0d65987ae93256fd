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
#include <sstream>

#include "episcen/attention.hpp"
#include "episcen/errors.hpp"
#include "episcen/rng.hpp"

namespace episcen {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

namespace {

constexpr std::array<std::string_view, kParamCount> kParamNames{
    "encoder.w1", "encoder.b1", "encoder.w2", "encoder.b2", "embedding.keys", "value.w",    "value.b",
    "context.w",  "context.b",  "conv1.w",    "conv1.b",    "conv2.w",        "conv2.b",    "conv3.w",
    "conv3.b",    "conv4.w",    "conv4.b",    "head1.w",    "head1.b",        "head2.w",    "head2.b",
    "head3.w",    "head3.b",    "head4.w",    "head4.b",
};

const double kInvSqrtDk = 1.0 / std::sqrt(static_cast<double>(kQueryDim));

constexpr std::size_t at(Param p) { return static_cast<std::size_t>(p); }

Param conv_w(std::size_t i) { return static_cast<Param>(at(Param::Conv1W) + 2 * i); }
Param conv_b(std::size_t i) { return static_cast<Param>(at(Param::Conv1B) + 2 * i); }
Param head_w(std::size_t i) { return static_cast<Param>(at(Param::Head1W) + 2 * i); }
Param head_b(std::size_t i) { return static_cast<Param>(at(Param::Head1B) + 2 * i); }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double silu(double x) { return x * sigmoid(x); }
double silu_grad(double x) {
    const double s = sigmoid(x);
    return s * (1.0 + x * (1.0 - s));
}

int context_size(const ModelConfig& c) { return c.context == ContextMode::Projected ? kQueryDim : static_cast<int>(kGeneCount); }

// Valid-padding Conv1D over samples laid out as C x (L * B), sample b occupying columns [b*L, (b+1)*L).
MatrixXd im2col(const MatrixXd& x, Index length, Index batch) {
    const Index cin = x.rows();
    const Index lout = length - kConvKernel + 1;
    MatrixXd cols(cin * kConvKernel, lout * batch);
    for (Index b = 0; b < batch; ++b)
        for (Index l = 0; l < lout; ++l)
            for (Index c = 0; c < cin; ++c)
                for (Index k = 0; k < kConvKernel; ++k) cols(c * kConvKernel + k, b * lout + l) = x(c, b * length + l + k);
    return cols;
}

MatrixXd col2im(const MatrixXd& cols, Index cin, Index length, Index batch) {
    const Index lout = length - kConvKernel + 1;
    MatrixXd x = MatrixXd::Zero(cin, length * batch);
    for (Index b = 0; b < batch; ++b)
        for (Index l = 0; l < lout; ++l)
            for (Index c = 0; c < cin; ++c)
                for (Index k = 0; k < kConvKernel; ++k) x(c, b * length + l + k) += cols(c * kConvKernel + k, b * lout + l);
    return x;
}

struct Cache {
    Index batch = 0;
    MatrixXd features, values_in;
    MatrixXd h1, query, attention, values, weighted, context, o_attn;
    std::array<MatrixXd, 4> conv_cols, conv_pre, conv_out;
    std::array<Index, 5> conv_len{};
    MatrixXd flat;
    std::array<MatrixXd, 4> head_pre, head_out;
    RowVectorXd output;
};

void check_finite(const MatrixXd& m, const char* where) {
    if (!m.allFinite()) throw NumericError(std::string("non-finite activations in ") + where);
}

MatrixXd encode(const ModelParams& p, const MatrixXd& features, MatrixXd* h1_out) {
    MatrixXd h1 = ((p[Param::EncoderW1] * features).colwise() + p[Param::EncoderB1].col(0)).array().tanh().matrix();
    MatrixXd q = ((p[Param::EncoderW2] * h1).colwise() + p[Param::EncoderB2].col(0)).array().tanh().matrix();
    if (h1_out) *h1_out = std::move(h1);
    return q;
}

MatrixXd attend(const ModelParams& p, const MatrixXd& query) {
    MatrixXd scores = (p[Param::Keys] * query) * kInvSqrtDk;
    return scores.unaryExpr([](double s) { return sigmoid(s); });
}

void run_forward(const ModelParams& p, const Batch& batch, Cache& c) {
    const ModelConfig& cfg = p.config;
    c.batch = batch.size();
    c.features = batch.features;
    c.values_in = batch.values;
    c.query = encode(p, batch.features, &c.h1);
    c.attention = attend(p, c.query);
    c.values = (p[Param::ValueW] * batch.values).colwise() + p[Param::ValueB].col(0);
    c.weighted = c.attention.cwiseProduct(c.values);
    if (cfg.context == ContextMode::Projected)
        c.context = (p[Param::ContextW] * c.weighted).colwise() + p[Param::ContextB].col(0);
    else
        c.context = c.weighted;

    const Index len0 = cfg.o_attn_size();
    c.o_attn.resize(len0, c.batch);
    c.o_attn << c.context, c.query, c.values;

    // One input channel; column-major storage already matches the C x (L * B) layout.
    MatrixXd x = Eigen::Map<const MatrixXd>(c.o_attn.data(), 1, len0 * c.batch);
    c.conv_len[0] = len0;
    for (std::size_t i = 0; i < 4; ++i) {
        const Index lin = c.conv_len[i];
        c.conv_len[i + 1] = lin - kConvKernel + 1;
        c.conv_cols[i] = im2col(x, lin, c.batch);
        c.conv_pre[i] = (p[conv_w(i)] * c.conv_cols[i]).colwise() + p[conv_b(i)].col(0);
        c.conv_out[i] = c.conv_pre[i].unaryExpr([](double v) { return silu(v); });
        x = c.conv_out[i];
    }
    const Index lend = c.conv_len[4];
    const Index channels = kConvChannels.back();
    c.flat.resize(channels * lend, c.batch);
    for (Index b = 0; b < c.batch; ++b)
        for (Index ch = 0; ch < channels; ++ch)
            for (Index l = 0; l < lend; ++l) c.flat(ch * lend + l, b) = c.conv_out[3](ch, b * lend + l);

    MatrixXd h = c.flat;
    for (std::size_t i = 0; i < 4; ++i) {
        c.head_pre[i] = (p[head_w(i)] * h).colwise() + p[head_b(i)].col(0);
        c.head_out[i] = i < 3 ? c.head_pre[i].unaryExpr([](double v) { return silu(v); }) : c.head_pre[i];
        h = c.head_out[i];
    }
    c.output = c.head_out[3].row(0);
    check_finite(c.output, "model output");
}

void run_backward(const ModelParams& p, const Cache& c, const RowVectorXd& d_output, ParamTensors& g) {
    const ModelConfig& cfg = p.config;
    MatrixXd dh = d_output;
    MatrixXd h_in;
    for (int i = 3; i >= 0; --i) {
        const auto ui = static_cast<std::size_t>(i);
        MatrixXd d_pre = i < 3 ? MatrixXd(dh.cwiseProduct(c.head_pre[ui].unaryExpr([](double v) { return silu_grad(v); })))
                               : dh;
        const MatrixXd& input = i == 0 ? c.flat : c.head_out[ui - 1];
        g[at(head_w(ui))] = d_pre * input.transpose();
        g[at(head_b(ui))] = d_pre.rowwise().sum();
        dh = p[head_w(ui)].transpose() * d_pre;
    }

    const Index lend = c.conv_len[4];
    const Index channels = kConvChannels.back();
    MatrixXd dx(channels, lend * c.batch);
    for (Index b = 0; b < c.batch; ++b)
        for (Index ch = 0; ch < channels; ++ch)
            for (Index l = 0; l < lend; ++l) dx(ch, b * lend + l) = dh(ch * lend + l, b);

    for (int i = 3; i >= 0; --i) {
        const auto ui = static_cast<std::size_t>(i);
        MatrixXd d_pre = dx.cwiseProduct(c.conv_pre[ui].unaryExpr([](double v) { return silu_grad(v); }));
        g[at(conv_w(ui))] = d_pre * c.conv_cols[ui].transpose();
        g[at(conv_b(ui))] = d_pre.rowwise().sum();
        const Index cin = i == 0 ? 1 : kConvChannels[ui - 1];
        dx = col2im(p[conv_w(ui)].transpose() * d_pre, cin, c.conv_len[ui], c.batch);
    }
    const Index len0 = c.conv_len[0];
    const MatrixXd d_o = Eigen::Map<const MatrixXd>(dx.data(), len0, c.batch);

    const Index ctx = context_size(cfg);
    const MatrixXd d_context = d_o.topRows(ctx);
    const MatrixXd d_query_direct = d_o.middleRows(ctx, kQueryDim);
    const MatrixXd d_values_direct = d_o.bottomRows(static_cast<Index>(kGeneCount));

    MatrixXd d_weighted;
    if (cfg.context == ContextMode::Projected) {
        g[at(Param::ContextW)] = d_context * c.weighted.transpose();
        g[at(Param::ContextB)] = d_context.rowwise().sum();
        d_weighted = p[Param::ContextW].transpose() * d_context;
    } else {
        g[at(Param::ContextW)].resize(0, 0);
        g[at(Param::ContextB)].resize(0, 0);
        d_weighted = d_context;
    }
    const MatrixXd d_attention = d_weighted.cwiseProduct(c.values);
    const MatrixXd d_values = d_weighted.cwiseProduct(c.attention) + d_values_direct;
    g[at(Param::ValueW)] = d_values * c.values_in.transpose();
    g[at(Param::ValueB)] = d_values.rowwise().sum();

    const MatrixXd d_scores =
        d_attention.cwiseProduct(c.attention.cwiseProduct((1.0 - c.attention.array()).matrix())) * kInvSqrtDk;
    g[at(Param::Keys)] = d_scores * c.query.transpose();
    const MatrixXd d_query = p[Param::Keys].transpose() * d_scores + d_query_direct;

    const MatrixXd d_q_pre = d_query.cwiseProduct((1.0 - c.query.array().square()).matrix());
    g[at(Param::EncoderW2)] = d_q_pre * c.h1.transpose();
    g[at(Param::EncoderB2)] = d_q_pre.rowwise().sum();
    const MatrixXd d_h1 = p[Param::EncoderW2].transpose() * d_q_pre;
    const MatrixXd d_h1_pre = d_h1.cwiseProduct((1.0 - c.h1.array().square()).matrix());
    g[at(Param::EncoderW1)] = d_h1_pre * c.features.transpose();
    g[at(Param::EncoderB1)] = d_h1_pre.rowwise().sum();
}

}  // namespace

int ModelConfig::o_attn_size() const noexcept { return context_size(*this) + kQueryDim + static_cast<int>(kGeneCount); }

int ModelConfig::flatten_size() const noexcept {
    return kConvChannels.back() * (o_attn_size() - static_cast<int>(kConvChannels.size()) * (kConvKernel - 1));
}

std::string_view param_name(Param p) noexcept { return kParamNames[at(p)]; }

bool is_head_param(Param p) noexcept { return at(p) >= at(Param::Conv1W); }

std::array<std::array<Index, 2>, kParamCount> ModelParams::shapes(const ModelConfig& cfg) {
    const Index hidden = cfg.encoder_hidden;
    const Index genes = static_cast<Index>(kGeneCount);
    const bool projected = cfg.context == ContextMode::Projected;
    std::array<std::array<Index, 2>, kParamCount> s{};
    s[at(Param::EncoderW1)] = {hidden, static_cast<Index>(kFeatureCount)};
    s[at(Param::EncoderB1)] = {hidden, 1};
    s[at(Param::EncoderW2)] = {kQueryDim, hidden};
    s[at(Param::EncoderB2)] = {kQueryDim, 1};
    s[at(Param::Keys)] = {genes, kQueryDim};
    s[at(Param::ValueW)] = {genes, genes};
    s[at(Param::ValueB)] = {genes, 1};
    s[at(Param::ContextW)] = projected ? std::array<Index, 2>{kQueryDim, genes} : std::array<Index, 2>{0, 0};
    s[at(Param::ContextB)] = projected ? std::array<Index, 2>{kQueryDim, 1} : std::array<Index, 2>{0, 0};
    Index cin = 1;
    for (std::size_t i = 0; i < 4; ++i) {
        s[at(conv_w(i))] = {kConvChannels[i], cin * kConvKernel};
        s[at(conv_b(i))] = {kConvChannels[i], 1};
        cin = kConvChannels[i];
    }
    Index fan_in = cfg.flatten_size();
    for (std::size_t i = 0; i < 4; ++i) {
        s[at(head_w(i))] = {kHeadWidths[i], fan_in};
        s[at(head_b(i))] = {kHeadWidths[i], 1};
        fan_in = kHeadWidths[i];
    }
    return s;
}

ModelParams ModelParams::initialize(const ModelConfig& config, std::uint64_t seed) {
    if (config.encoder_hidden < 1) throw ContractError("encoder_hidden must be >= 1");
    ModelParams p;
    p.config = config;
    Rng rng(derive_seed(seed, {0x1417ULL}));
    const auto shapes = ModelParams::shapes(config);
    for (std::size_t i = 0; i < kParamCount; ++i) {
        const auto [rows, cols] = shapes[i];
        MatrixXd m = MatrixXd::Zero(rows, cols);
        const auto param = static_cast<Param>(i);
        const bool bias = param_name(param).ends_with(".b");
        if (!bias && rows > 0) {
            double limit;
            if (param == Param::Keys) {
                limit = 0.05;
            } else if (is_head_param(param) && param != Param::Head4W) {
                // He-uniform for the SiLU layers keeps activations from shrinking through the deep head.
                limit = std::sqrt(6.0 / static_cast<double>(cols));
            } else {
                limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
            }
            for (Index c = 0; c < cols; ++c)
                for (Index r = 0; r < rows; ++r) m(r, c) = rng.uniform(-limit, limit);
        }
        // Start the value layer near identity so that V(j) carries gene j and A(j) gates that gene.
        if (param == Param::ValueW) m += MatrixXd::Identity(rows, cols);
        p.tensors[i] = std::move(m);
    }
    return p;
}

std::size_t ModelParams::scalar_count() const noexcept {
    std::size_t n = 0;
    for (const auto& t : tensors) n += static_cast<std::size_t>(t.size());
    return n;
}

Batch Batch::from(std::span<const TrainingSample> samples) {
    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    return from(samples, order);
}

Batch Batch::from(std::span<const TrainingSample> samples, std::span<const std::size_t> order) {
    const auto n = static_cast<Index>(order.size());
    Batch b;
    b.features.resize(static_cast<Index>(kFeatureCount), n);
    b.values.resize(static_cast<Index>(kGeneCount), n);
    b.targets.resize(n);
    for (Index j = 0; j < n; ++j) {
        const TrainingSample& s = samples[order[static_cast<std::size_t>(j)]];
        for (std::size_t i = 0; i < kFeatureCount; ++i) b.features(static_cast<Index>(i), j) = s.features[i];
        for (std::size_t i = 0; i < kGeneCount; ++i) b.values(static_cast<Index>(i), j) = s.values[i];
        b.targets(j) = s.target;
    }
    return b;
}

VectorXd attention_weights(const ModelParams& params, std::span<const double> features) {
    if (features.size() != kFeatureCount) throw ContractError("attention_weights: expected 16 state features");
    const MatrixXd f = Eigen::Map<const VectorXd>(features.data(), static_cast<Index>(features.size()));
    const MatrixXd a = attend(params, encode(params, f, nullptr));
    check_finite(a, "attention weights");
    return a.col(0);
}

ForwardTrace forward_trace(const ModelParams& params, const TrainingSample& sample) {
    Cache c;
    run_forward(params, Batch::from(std::span(&sample, 1)), c);
    ForwardTrace t;
    t.query = c.query.col(0);
    t.attention = c.attention.col(0);
    t.values = c.values.col(0);
    t.o_attn = c.o_attn.col(0);
    t.flatten = c.flat.col(0);
    t.output = c.output(0);
    return t;
}

double forward(const ModelParams& params, const TrainingSample& sample) { return forward_trace(params, sample).output; }

RowVectorXd predict(const ModelParams& params, const Batch& batch) {
    Cache c;
    run_forward(params, batch, c);
    return c.output;
}

double smooth_l1(double prediction, double target) noexcept {
    const double diff = std::abs(target - prediction);
    return diff < 1.0 ? 0.5 * diff * diff : diff - 0.5;
}

double smooth_l1_grad(double prediction, double target) noexcept {
    const double diff = prediction - target;
    if (std::abs(diff) < 1.0) return diff;
    return diff > 0.0 ? 1.0 : -1.0;
}

double smooth_l1_mean(std::span<const double> predictions, std::span<const double> targets) {
    if (predictions.size() != targets.size() || predictions.empty())
        throw ContractError("smooth_l1_mean: prediction/target size mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) sum += smooth_l1(predictions[i], targets[i]);
    return sum / static_cast<double>(predictions.size());
}

double loss_and_gradient(const ModelParams& params, const Batch& batch, ParamTensors* grads) {
    if (batch.size() == 0) throw ContractError("loss_and_gradient: empty batch");
    Cache c;
    run_forward(params, batch, c);
    const auto n = static_cast<double>(batch.size());
    double loss = 0.0;
    RowVectorXd d_out(batch.size());
    for (Index j = 0; j < batch.size(); ++j) {
        loss += smooth_l1(c.output(j), batch.targets(j));
        d_out(j) = smooth_l1_grad(c.output(j), batch.targets(j)) / n;
    }
    if (grads) run_backward(params, c, d_out, *grads);
    return loss / n;
}

GsProbabilities AttentionProvider::query(std::span<const double> state) const {
    const VectorXd a = attention_weights(params_, state);
    std::array<double, kGeneCount> expression{};
    for (std::size_t j = 0; j < kGeneCount; ++j) expression[j] = a(static_cast<Index>(j));
    return GsProbabilities::from_expression(expression);
}

}  // namespace episcen
