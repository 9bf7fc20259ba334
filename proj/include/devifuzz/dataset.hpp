#pragma once

#include <cstdint>
#include <vector>

#include "devifuzz/model.hpp"

namespace devifuzz {

/// Deterministic synthetic image classification task: one random prototype
/// image per class, samples are the prototype plus Gaussian pixel noise,
/// clamped to [0,1]. Keeps the whole pipeline runnable without external
/// dataset downloads.
struct SyntheticSpec {
    std::size_t classes = 10;
    std::size_t train_per_class = 200;
    std::size_t test_per_class = 100;
    std::vector<std::size_t> image_shape = {1, 8, 8};
    double noise_sigma = 0.25;
    std::uint64_t seed = 7;
};

struct SyntheticDataset {
    LabeledDataset train;
    LabeledDataset test;
};

SyntheticDataset make_synthetic(const SyntheticSpec& spec);

/// Linearly separable two-class set in the plane, as flat [2] tensors.
LabeledDataset make_separable_2class(std::size_t per_class, std::uint64_t seed);

} // namespace devifuzz
