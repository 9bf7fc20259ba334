#include "devifuzz/mutation.hpp"

#include <algorithm>

namespace devifuzz {

namespace {

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

} // namespace

Tensor mutate_pixel_perturb(const Tensor& x, Rng& rng, std::size_t pixels, double amplitude) {
    Tensor out = x;
    const std::size_t n = out.size();
    const std::size_t k = std::min(pixels, n);
    // Partial Fisher-Yates over an index list picks k distinct pixels.
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + rng.uniform_index(n - i);
        std::swap(idx[i], idx[j]);
        // Magnitude in (0, amplitude]: a zero delta would leave the pixel
        // untouched and break the "k pixels changed" contract.
        const double magnitude = amplitude * (1.0 - rng.uniform());
        const double delta = rng.coin() ? magnitude : -magnitude;
        out.data[idx[i]] = clamp01(out.data[idx[i]] + delta);
    }
    return out;
}

Tensor mutate_gaussian_noise(const Tensor& x, Rng& rng, double sigma) {
    Tensor out = x;
    for (double& v : out.data) v = clamp01(v + sigma * rng.normal());
    return out;
}

Tensor mutate_brightness(const Tensor& x, Rng& rng, double delta) {
    Tensor out = x;
    const double shift = rng.uniform(-delta, delta);
    for (double& v : out.data) v = clamp01(v + shift);
    return out;
}

Tensor mutate_contrast(const Tensor& x, Rng& rng, double strength) {
    Tensor out = x;
    const double factor = rng.uniform(1.0 - strength, 1.0 + strength);
    for (double& v : out.data) v = clamp01(0.5 + factor * (v - 0.5));
    return out;
}

OperatorPool make_default_pool(const OperatorParams& params) {
    OperatorPool pool;
    pool.add("pixel_perturb", [params](const Tensor& x, Rng& rng) {
        return mutate_pixel_perturb(x, rng, params.perturb_pixels, params.perturb_amplitude);
    });
    pool.add("gaussian_noise", [params](const Tensor& x, Rng& rng) {
        return mutate_gaussian_noise(x, rng, params.noise_sigma);
    });
    pool.add("brightness", [params](const Tensor& x, Rng& rng) {
        return mutate_brightness(x, rng, params.brightness_delta);
    });
    pool.add("contrast", [params](const Tensor& x, Rng& rng) {
        return mutate_contrast(x, rng, params.contrast_strength);
    });
    return pool;
}

} // namespace devifuzz
