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

// Epigenetic model.
//
//   state features (16) --MLP encoder--> Q (48)
//   parameter names      --embedding --> K (10 x 48)
//   A = sigmoid(Q K^T / sqrt(48))                      (10, the expression probabilities)
//   parameter values (10) --FC--> V (10)
//   O_attn = [ctx(A * V), Q, V]                        (106 with the projected context)
//   O_attn --Conv1D x4--> flatten (3136) --MLP 512/256/128/1--> predicted minimum distance
//
// Gradients are computed analytically; training uses SGD with momentum and the
// smooth L1 loss. All arithmetic is double precision.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "episcen/epiga.hpp"
#include "episcen/scenario.hpp"
#include "episcen/simenv.hpp"

namespace episcen {

inline constexpr int kQueryDim = 48;
inline constexpr int kConvKernel = 3;
inline constexpr std::array<int, 4> kConvChannels{16, 32, 64, 32};
inline constexpr std::array<int, 4> kHeadWidths{512, 256, 128, 1};

enum class ContextMode {
    /// A * V projected by a learned 10 -> 48 map; O_attn has 106 entries.
    Projected,
    /// Raw A * V (10 wide); O_attn has 68 entries. Ablation only.
    Raw,
};

struct ModelConfig {
    ContextMode context = ContextMode::Projected;
    int encoder_hidden = 64;

    int o_attn_size() const noexcept;
    int flatten_size() const noexcept;
};

enum class Param : std::size_t {
    EncoderW1, EncoderB1, EncoderW2, EncoderB2,
    Keys,
    ValueW, ValueB,
    ContextW, ContextB,
    Conv1W, Conv1B, Conv2W, Conv2B, Conv3W, Conv3B, Conv4W, Conv4B,
    Head1W, Head1B, Head2W, Head2B, Head3W, Head3B, Head4W, Head4B,
};
inline constexpr std::size_t kParamCount = 25;

std::string_view param_name(Param p) noexcept;
/// True for the Conv1D stack and the fitness MLP.
bool is_head_param(Param p) noexcept;

using ParamTensors = std::array<Eigen::MatrixXd, kParamCount>;

struct ModelParams {
    ModelConfig config;
    ParamTensors tensors;

    /// Xavier-uniform weights, zero biases, small embedding rows.
    static ModelParams initialize(const ModelConfig& config, std::uint64_t seed);

    Eigen::MatrixXd& operator[](Param p) { return tensors[static_cast<std::size_t>(p)]; }
    const Eigen::MatrixXd& operator[](Param p) const { return tensors[static_cast<std::size_t>(p)]; }
    std::size_t scalar_count() const noexcept;
    /// Expected (rows, cols) of every tensor for this config.
    static std::array<std::array<Eigen::Index, 2>, kParamCount> shapes(const ModelConfig& config);
};

struct TrainingSample {
    FeatureVector features{};
    std::array<double, kGeneCount> values{};   // genome scaled to [0, 1]
    double target = 0.0;                       // ground-truth minimum distance
};

/// Column-major batch: one sample per column.
struct Batch {
    Eigen::MatrixXd features;   // 16 x B
    Eigen::MatrixXd values;     // 10 x B
    Eigen::RowVectorXd targets; // 1 x B

    static Batch from(std::span<const TrainingSample> samples);
    static Batch from(std::span<const TrainingSample> samples, std::span<const std::size_t> order);
    Eigen::Index size() const noexcept { return targets.size(); }
};

/// Intermediate values of one forward pass over a single sample.
struct ForwardTrace {
    Eigen::VectorXd query;
    Eigen::VectorXd attention;
    Eigen::VectorXd values;
    Eigen::VectorXd o_attn;
    Eigen::VectorXd flatten;
    double output = 0.0;
};

/// A = sigmoid(Q K^T / sqrt(48)) for the given state features. Throws NumericError on non-finite values.
Eigen::VectorXd attention_weights(const ModelParams& params, std::span<const double> features);

double forward(const ModelParams& params, const TrainingSample& sample);
ForwardTrace forward_trace(const ModelParams& params, const TrainingSample& sample);
/// Predictions for every column of the batch.
Eigen::RowVectorXd predict(const ModelParams& params, const Batch& batch);

double smooth_l1(double prediction, double target) noexcept;
/// d smooth_l1 / d prediction.
double smooth_l1_grad(double prediction, double target) noexcept;
double smooth_l1_mean(std::span<const double> predictions, std::span<const double> targets);

/// Mean smooth L1 loss over the batch; fills `grads` (same shapes as params) when non-null.
double loss_and_gradient(const ModelParams& params, const Batch& batch, ParamTensors* grads);

enum class Optimizer {
    /// SGD with momentum.
    Sgd,
    /// Adam with bias correction (beta1 = momentum, beta2 = 0.999).
    Adam,
};

struct TrainHyper {
    int batch_size = 64;
    int epochs = 30;
    double learning_rate = 1e-3;
    double momentum = 0.9;
    Optimizer optimizer = Optimizer::Sgd;
    std::uint64_t seed = 0;
    double test_fraction = 0.2;
    /// Only the encoder, embedding, value and context layers are updated.
    bool freeze_head = false;
    ModelConfig model;
};

struct TrainResult {
    ModelParams params;
    double test_mse = 0.0;
    double test_mae = 0.0;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
    /// Mini-batch loss at every optimisation step.
    std::vector<double> loss_history;
};

/// Shuffle, split train/test, and run mini-batch SGD with momentum.
/// Starts from `init` when given. Throws NumericError on divergence
/// (batch loss above 10x the first batch loss) or non-finite values.
TrainResult train(std::span<const TrainingSample> dataset, const TrainHyper& hyper, const ModelParams* init = nullptr);

/// Mean of `values` over consecutive windows of the given width.
std::vector<double> windowed_means(std::span<const double> values, std::size_t window);

struct DatasetResult {
    std::vector<TrainingSample> samples;
    std::size_t attempted = 0;
    double acceptance_rate = 0.0;
};

inline constexpr double kDatasetMaxDistance = 5.0;

/// Records with minimum distance <= 5 m are kept (the boundary is kept).
constexpr bool keep_for_training(double md) noexcept { return md <= kDatasetMaxDistance; }

/// Random-strategy dataset: uniform genomes run round-robin over `layouts`.
/// Warns on stderr when fewer than 100 samples survive the filter.
DatasetResult build_dataset(std::span<const LayoutId> layouts, std::size_t n_samples, std::uint64_t seed,
                            const SimConfig& sim = {});

TrainingSample make_sample(const SimOutcome& outcome, const ScenarioGenome& genome);

/// GS provider backed by the model: silencing = 1 - A, so expression = A.
class AttentionProvider final : public GsProvider {
public:
    explicit AttentionProvider(ModelParams params) : params_(std::move(params)) {}
    GsProbabilities query(std::span<const double> state) const override;
    std::string name() const override { return "attention"; }
    const ModelParams& params() const noexcept { return params_; }

private:
    ModelParams params_;
};

// ---- persistence -------------------------------------------------------------

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
/// Throws InputError on a malformed file or a shape mismatch.
ModelParams load_checkpoint(const std::filesystem::path& path);

void write_dataset_csv(std::span<const TrainingSample> samples, const std::filesystem::path& path);
std::vector<TrainingSample> read_dataset_csv(const std::filesystem::path& path);

}  // namespace episcen
