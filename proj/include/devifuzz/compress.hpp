#pragma once

#include <span>

#include "devifuzz/model.hpp"

namespace devifuzz {

/// Per-tensor 8-bit affine quantization scheme over the tensor's [min,max].
/// Codes live in [0,255]; reconstruction is (q - zero_point) * scale, so the
/// elementwise error is bounded by scale/2 = (max-min)/255/2.
/// A constant tensor degenerates (scale would be 0) and is passed through
/// unchanged.
struct QuantScheme {
    int bits = 8;
    double scale = 0.0;
    long zero_point = 0;
    bool degenerate = false;
};

QuantScheme compute_quant_scheme(std::span<const float> values);

/// Round-half-to-even, independent of the FP environment.
double round_half_even(double x);

/// Simulated quantization: every parameter tensor (weights and biases,
/// per-layer, per-slice) is replaced by dequantize(quantize(w)); the
/// architecture and float arithmetic stay as they were.
ModelGraph quantize_model(const ModelGraph& m);

/// Magnitude pruning: per weight tensor, the `sparsity` fraction of
/// smallest-magnitude entries is set to zero (floor(sparsity*len) entries,
/// ties broken toward the earlier flat index). Biases are exempt.
/// sparsity outside [0,1) is a contract violation.
ModelGraph prune_model(const ModelGraph& m, double sparsity);

} // namespace devifuzz
