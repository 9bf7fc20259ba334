#include "devifuzz/compress.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "devifuzz/errors.hpp"

namespace devifuzz {

double round_half_even(double x) {
    const double f = std::floor(x);
    const double frac = x - f;
    if (frac < 0.5) return f;
    if (frac > 0.5) return f + 1.0;
    return std::fmod(f, 2.0) == 0.0 ? f : f + 1.0;
}

QuantScheme compute_quant_scheme(std::span<const float> values) {
    QuantScheme s;
    if (values.empty()) {
        s.degenerate = true;
        return s;
    }
    double lo = values[0], hi = values[0];
    for (float v : values) {
        lo = std::min(lo, static_cast<double>(v));
        hi = std::max(hi, static_cast<double>(v));
    }
    if (hi == lo) {
        s.degenerate = true;
        return s;
    }
    s.scale = (hi - lo) / 255.0;
    // Integer code of real zero. May fall outside [0,255] when the range
    // does not straddle zero; reconstruction stays anchored to [min,max]
    // either way because the zero_point cancels: deq(q(w)) = round(w/scale)*scale.
    s.zero_point = static_cast<long>(round_half_even(-lo / s.scale));
    return s;
}

namespace {

void quantize_slice(std::span<float> values) {
    const QuantScheme s = compute_quant_scheme(values);
    if (s.degenerate) return;
    for (float& v : values) {
        const double w = static_cast<double>(v);
        long q = s.zero_point + static_cast<long>(round_half_even(w / s.scale));
        // In-range values land in [0,255] except at exact rounding ties on the
        // range ends, where the clamp keeps the error at scale/2.
        if (q < 0) q = 0;
        if (q > 255) q = 255;
        const double deq = static_cast<double>(q - s.zero_point) * s.scale;
        float stored = static_cast<float>(deq);
        // float32 rounding of deq may land on the far side of the scale/2
        // envelope; the adjacent float toward w is always inside it.
        if (std::fabs(w - static_cast<double>(stored)) > 0.5 * s.scale)
            stored = std::nextafterf(stored, static_cast<float>(w));
        v = stored;
    }
}

void prune_slice(std::span<float> values, double sparsity) {
    const std::size_t n = values.size();
    const std::size_t kill = static_cast<std::size_t>(
        std::floor(sparsity * static_cast<double>(n)));
    if (kill == 0) return;
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const double ma = std::fabs(static_cast<double>(values[a]));
        const double mb = std::fabs(static_cast<double>(values[b]));
        if (ma != mb) return ma < mb;
        return a < b;
    });
    for (std::size_t i = 0; i < kill; ++i) values[idx[i]] = 0.0f;
}

} // namespace

ModelGraph quantize_model(const ModelGraph& m) {
    m.validate();
    ModelGraph out = m;
    for (const LayerSpec& l : out.manifest.layers) {
        if (!l.has_params()) continue;
        quantize_slice({out.weights.data() + l.weight_offset, l.weight_len});
        quantize_slice({out.weights.data() + l.bias_offset, l.bias_len});
    }
    return out;
}

ModelGraph prune_model(const ModelGraph& m, double sparsity) {
    if (!(sparsity >= 0.0 && sparsity < 1.0))
        throw ContractViolation("prune_model: sparsity must be in [0,1)");
    m.validate();
    ModelGraph out = m;
    for (const LayerSpec& l : out.manifest.layers) {
        if (!l.has_params()) continue;
        prune_slice({out.weights.data() + l.weight_offset, l.weight_len}, sparsity);
    }
    return out;
}

} // namespace devifuzz
