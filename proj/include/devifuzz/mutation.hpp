#pragma once

#include <cassert>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "devifuzz/rng.hpp"
#include "devifuzz/tensor.hpp"

namespace devifuzz {

/// Input transformation plus the two counters driving operator ranking:
/// n_applied counts selections that were applied, n_improved counts
/// applications after which the incumbent fitness went up.
class MutationOperator {
public:
    using Transform = std::function<Tensor(const Tensor&, Rng&)>;

    MutationOperator(int id, std::string name, Transform transform)
        : id_(id), name_(std::move(name)), transform_(std::move(transform)) {}

    int id() const { return id_; }
    const std::string& name() const { return name_; }
    std::uint64_t applied_count() const { return n_applied_; }
    std::uint64_t improved_count() const { return n_improved_; }

    /// Mutated copy of x, same shape, clamped to [0,1]. All randomness comes
    /// from the supplied rng.
    Tensor apply(const Tensor& x, Rng& rng) const { return transform_(x, rng); }

    /// n_improved / n_applied; 0 for a never-applied operator.
    double ranking() const {
        return n_applied_ == 0 ? 0.0
                               : static_cast<double>(n_improved_) / static_cast<double>(n_applied_);
    }

    void record_applied() { ++n_applied_; }
    void record_improved() {
        ++n_improved_;
        assert(n_improved_ <= n_applied_);
    }

private:
    int id_;
    std::string name_;
    Transform transform_;
    std::uint64_t n_applied_ = 0;
    std::uint64_t n_improved_ = 0;
};

/// Hyperparameters of the default image operator pool.
struct OperatorParams {
    std::size_t perturb_pixels = 8;    // pixels touched by the point perturbation
    double perturb_amplitude = 0.5;    // max |delta| per touched pixel
    double noise_sigma = 0.1;          // additive Gaussian noise
    double brightness_delta = 0.1;     // uniform shift drawn from [-delta, delta]
    double contrast_strength = 0.2;    // factor drawn from [1-s, 1+s], pivot 0.5
};

class OperatorPool {
public:
    OperatorPool() = default;

    int add(std::string name, MutationOperator::Transform transform) {
        const int id = static_cast<int>(ops_.size());
        ops_.emplace_back(id, std::move(name), std::move(transform));
        return id;
    }

    std::size_t size() const { return ops_.size(); }
    bool empty() const { return ops_.empty(); }

    MutationOperator& at(int id) { return ops_.at(static_cast<std::size_t>(id)); }
    const MutationOperator& at(int id) const { return ops_.at(static_cast<std::size_t>(id)); }

    /// Multiplicative inverse of the pool size.
    double inverse_size() const { return 1.0 / static_cast<double>(ops_.size()); }

    auto begin() const { return ops_.begin(); }
    auto end() const { return ops_.end(); }

private:
    std::vector<MutationOperator> ops_;
};

/// The four stock operators: random pixel perturbation, additive Gaussian
/// noise, brightness shift, contrast scale around 0.5.
OperatorPool make_default_pool(const OperatorParams& params = {});

// Individual transforms, exposed for direct tests and custom pools.
Tensor mutate_pixel_perturb(const Tensor& x, Rng& rng, std::size_t pixels, double amplitude);
Tensor mutate_gaussian_noise(const Tensor& x, Rng& rng, double sigma);
Tensor mutate_brightness(const Tensor& x, Rng& rng, double delta);
Tensor mutate_contrast(const Tensor& x, Rng& rng, double strength);

} // namespace devifuzz
