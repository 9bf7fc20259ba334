#include "devifuzz/dataset.hpp"

#include <algorithm>

#include "devifuzz/rng.hpp"

namespace devifuzz {

namespace {

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

LabeledDataset sample_split(const std::vector<Tensor>& prototypes,
                            const std::vector<std::size_t>& shape, std::size_t per_class,
                            double sigma, Rng& rng) {
    LabeledDataset out;
    out.num_classes = prototypes.size();
    for (std::size_t c = 0; c < prototypes.size(); ++c) {
        for (std::size_t i = 0; i < per_class; ++i) {
            Tensor t = Tensor::zeros(shape);
            for (std::size_t p = 0; p < t.size(); ++p)
                t.data[p] = clamp01(prototypes[c].data[p] + sigma * rng.normal());
            out.images.push_back(std::move(t));
            out.labels.push_back(c);
        }
    }
    out.validate();
    return out;
}

} // namespace

SyntheticDataset make_synthetic(const SyntheticSpec& spec) {
    Rng proto_rng(derive_seed(spec.seed, 1));
    std::vector<Tensor> prototypes;
    prototypes.reserve(spec.classes);
    for (std::size_t c = 0; c < spec.classes; ++c) {
        Tensor t = Tensor::zeros(spec.image_shape);
        for (std::size_t p = 0; p < t.size(); ++p) t.data[p] = proto_rng.uniform();
        prototypes.push_back(std::move(t));
    }

    Rng train_rng(derive_seed(spec.seed, 2));
    Rng test_rng(derive_seed(spec.seed, 3));
    SyntheticDataset ds;
    ds.train = sample_split(prototypes, spec.image_shape, spec.train_per_class, spec.noise_sigma,
                            train_rng);
    ds.test = sample_split(prototypes, spec.image_shape, spec.test_per_class, spec.noise_sigma,
                           test_rng);
    return ds;
}

LabeledDataset make_separable_2class(std::size_t per_class, std::uint64_t seed) {
    Rng rng(seed);
    LabeledDataset out;
    out.num_classes = 2;
    // Class 0 below the diagonal with a margin, class 1 above it.
    for (std::size_t i = 0; i < per_class; ++i) {
        const double a = rng.uniform(0.1, 0.9);
        const double gap = rng.uniform(0.05, 0.4);
        out.images.push_back(Tensor({2}, {clamp01(a + gap), clamp01(a - gap)}));
        out.labels.push_back(0);
        const double b = rng.uniform(0.1, 0.9);
        const double gap2 = rng.uniform(0.05, 0.4);
        out.images.push_back(Tensor({2}, {clamp01(b - gap2), clamp01(b + gap2)}));
        out.labels.push_back(1);
    }
    out.validate();
    return out;
}

} // namespace devifuzz
