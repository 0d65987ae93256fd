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
#include <cmath>
#include <iostream>
#include <numeric>
#include <sstream>

#include "episcen/attention.hpp"
#include "episcen/errors.hpp"
#include "episcen/rng.hpp"

namespace episcen {

namespace {

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
    // Fisher-Yates on our own RNG so the order is stable across standard libraries.
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.index(i)]);
}

}  // namespace

TrainResult train(std::span<const TrainingSample> dataset, const TrainHyper& hyper, const ModelParams* init) {
    if (dataset.size() < 2) throw InputError("train: need at least two samples");
    if (hyper.batch_size < 1 || hyper.epochs < 0) throw InputError("train: batch_size >= 1 and epochs >= 0 required");
    if (!(hyper.test_fraction >= 0.0 && hyper.test_fraction < 1.0)) throw InputError("train: test_fraction must be in [0, 1)");
    if (!(hyper.learning_rate > 0.0) || !(hyper.momentum >= 0.0 && hyper.momentum < 1.0))
        throw InputError("train: learning_rate > 0 and momentum in [0, 1) required");

    Rng rng(derive_seed(hyper.seed, {0x7a1aULL}));
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, rng);
    auto test_n = static_cast<std::size_t>(std::floor(hyper.test_fraction * static_cast<double>(dataset.size())));
    test_n = std::min(test_n, dataset.size() - 1);
    std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(test_n));
    std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(test_n), order.end());

    TrainResult result;
    result.params = init ? *init : ModelParams::initialize(hyper.model, hyper.seed);
    if (init && init->config.context != hyper.model.context) throw InputError("train: initial params do not match the model config");
    result.train_size = train_idx.size();
    result.test_size = test.size();

    if (!init) {
        // Start the output at the mean training target so early steps shape the features, not the offset.
        double mean = 0.0;
        for (std::size_t i : train_idx) mean += dataset[i].target;
        result.params[Param::Head4B](0, 0) = mean / static_cast<double>(train_idx.size());
    }

    ParamTensors velocity, second, grads;
    for (std::size_t i = 0; i < kParamCount; ++i) {
        velocity[i] = Eigen::MatrixXd::Zero(result.params.tensors[i].rows(), result.params.tensors[i].cols());
        second[i] = velocity[i];
    }
    constexpr double kBeta2 = 0.999;
    constexpr double kAdamEps = 1e-8;

    double first_loss = -1.0;
    const auto batch = static_cast<std::size_t>(hyper.batch_size);
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        shuffle(train_idx, rng);
        for (std::size_t start = 0; start < train_idx.size(); start += batch) {
            const std::size_t end = std::min(train_idx.size(), start + batch);
            const Batch b = Batch::from(dataset, std::span(train_idx).subspan(start, end - start));
            const double loss = loss_and_gradient(result.params, b, &grads);
            if (!std::isfinite(loss)) throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch));
            if (first_loss < 0.0) first_loss = loss;
            if (first_loss > 0.0 && loss > 10.0 * first_loss) {
                std::ostringstream msg;
                msg << "train: diverged at epoch " << epoch << " step " << result.loss_history.size() << " (loss " << loss
                    << ", initial " << first_loss << "); lower the learning rate";
                throw NumericError(msg.str());
            }
            result.loss_history.push_back(loss);
            const auto step = static_cast<double>(result.loss_history.size());
            for (std::size_t i = 0; i < kParamCount; ++i) {
                if (hyper.freeze_head && is_head_param(static_cast<Param>(i))) continue;
                if (result.params.tensors[i].size() == 0) continue;
                if (hyper.optimizer == Optimizer::Sgd) {
                    velocity[i] = hyper.momentum * velocity[i] - hyper.learning_rate * grads[i];
                    result.params.tensors[i] += velocity[i];
                } else {
                    velocity[i] = hyper.momentum * velocity[i] + (1.0 - hyper.momentum) * grads[i];
                    second[i] = kBeta2 * second[i] + (1.0 - kBeta2) * grads[i].cwiseAbs2();
                    const double c1 = 1.0 - std::pow(hyper.momentum, step);
                    const double c2 = 1.0 - std::pow(kBeta2, step);
                    result.params.tensors[i].array() -= hyper.learning_rate * (velocity[i].array() / c1) /
                                                        ((second[i].array() / c2).sqrt() + kAdamEps);
                }
            }
        }
    }

    const std::span<const std::size_t> eval = test.empty() ? std::span<const std::size_t>(train_idx) : std::span(test);
    const Batch tb = Batch::from(dataset, eval);
    const Eigen::RowVectorXd pred = predict(result.params, tb);
    const Eigen::RowVectorXd err = pred - tb.targets;
    result.test_mse = err.squaredNorm() / static_cast<double>(err.size());
    result.test_mae = err.cwiseAbs().sum() / static_cast<double>(err.size());
    return result;
}

std::vector<double> windowed_means(std::span<const double> values, std::size_t window) {
    if (window == 0) throw ContractError("windowed_means: window must be >= 1");
    std::vector<double> out;
    for (std::size_t start = 0; start + window <= values.size(); start += window) {
        double sum = 0.0;
        for (std::size_t i = start; i < start + window; ++i) sum += values[i];
        out.push_back(sum / static_cast<double>(window));
    }
    return out;
}

TrainingSample make_sample(const SimOutcome& outcome, const ScenarioGenome& genome) {
    TrainingSample s;
    s.features = outcome.features;
    s.values = scale_unit(genome);
    s.target = outcome.metrics.md;
    return s;
}

DatasetResult build_dataset(std::span<const LayoutId> layouts, std::size_t n_samples, std::uint64_t seed,
                            const SimConfig& sim) {
    if (n_samples < 1) throw InputError("build_dataset: n_samples must be >= 1");
    if (layouts.empty()) throw InputError("build_dataset: at least one layout required");
    DatasetResult result;
    Rng rng(derive_seed(seed, {0xda7aULL}));
    for (std::size_t i = 0; i < n_samples; ++i) {
        const LayoutId id = layouts[i % layouts.size()];
        const ScenarioGenome genome = sample_uniform(rng);
        const SimOutcome outcome = run_episode(layout(id), genome, derive_seed(seed, {0xe915ULL, i}), sim);
        ++result.attempted;
        if (keep_for_training(outcome.metrics.md)) result.samples.push_back(make_sample(outcome, genome));
    }
    result.acceptance_rate = static_cast<double>(result.samples.size()) / static_cast<double>(result.attempted);
    if (result.samples.size() < 100)
        std::cerr << "warning: only " << result.samples.size() << " of " << result.attempted
                  << " samples have minimum distance <= " << kDatasetMaxDistance << " m\n";
    return result;
}

}  // namespace episcen
