#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "devifuzz/errors.hpp"

namespace devifuzz {

/// Dense row-major tensor of 64-bit reals. Search-side inputs and all
/// probability arithmetic run in double; model parameters are stored
/// separately as 32-bit floats (see ModelGraph).
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> shape_, std::vector<double> data_);

    static Tensor zeros(std::vector<std::size_t> shape_);
    static Tensor filled(std::vector<std::size_t> shape_, double value);

    std::size_t size() const { return data.size(); }

    bool operator==(const Tensor& other) const = default;

    /// Throws ContractViolation if shape product != data length or any
    /// element is non-finite.
    void validate() const;
};

std::size_t shape_product(std::span<const std::size_t> shape);

/// Normalized classifier output: each entry in [0,1], sum within 1e-6 of 1.
struct ProbVector {
    std::vector<double> probs;

    std::size_t size() const { return probs.size(); }
    bool operator==(const ProbVector& other) const = default;

    void validate() const;
};

struct Top1 {
    std::size_t label;
    double prob;
};

/// Index and value of the maximum element; ties broken by lowest index.
/// Works on any non-empty real vector (argmax does not need normalization).
Top1 top1(std::span<const double> values);
Top1 top1(const ProbVector& v);

/// Euclidean distance between two equal-length real vectors.
double l2_distance(std::span<const double> a, std::span<const double> b);

} // namespace devifuzz
