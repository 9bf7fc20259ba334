#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "devifuzz/model.hpp"

namespace devifuzz {

/// Deterministic forward pass. Parameters are float32, accumulation runs in
/// double, softmax uses max-subtraction. Same input, same bits out.
ProbVector predict(const ModelGraph& m, const Tensor& x);

/// Fraction of the dataset classified correctly (top-1 vs label).
double accuracy(const ModelGraph& m, const LabeledDataset& data);

struct GradResult {
    std::vector<double> grad; // aligned with ModelGraph::weights
    double loss = 0.0;        // mean cross-entropy over the batch
};

/// Gradient of mean cross-entropy for a batch of dataset rows.
/// Dense-only models (flatten/dense/relu/softmax); anything else throws
/// UnsupportedError.
GradResult loss_gradient(const ModelGraph& m, const LabeledDataset& data,
                         std::span<const std::size_t> batch_indices);

struct MlpTrainConfig {
    std::vector<std::size_t> hidden_sizes = {64};
    std::size_t epochs = 30;
    double learning_rate = 0.1;
    std::size_t batch_size = 32;
    std::uint64_t rng_seed = 1;
    std::string name = "mlp";
};

struct TrainOutcome {
    ModelGraph model;
    double train_accuracy = 0.0;
};

/// Minibatch SGD on a dense MLP (flatten, [dense+relu]*, dense, softmax).
/// Deterministic for a fixed rng seed; zero epochs returns the seeded
/// initialization untouched.
TrainOutcome train_mlp(const LabeledDataset& data, const MlpTrainConfig& cfg);

/// Seeded initial MLP, exposed so the zero-epoch identity is testable.
ModelGraph init_mlp(const std::vector<std::size_t>& input_shape, std::size_t num_classes,
                    const MlpTrainConfig& cfg);

} // namespace devifuzz
