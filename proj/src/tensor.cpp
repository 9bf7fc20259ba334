#include "devifuzz/tensor.hpp"

#include <cmath>
#include <utility>

namespace devifuzz {

std::size_t shape_product(std::span<const std::size_t> shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

Tensor::Tensor(std::vector<std::size_t> shape_, std::vector<double> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
    validate();
}

Tensor Tensor::zeros(std::vector<std::size_t> shape_) {
    std::vector<double> d(shape_product(shape_), 0.0);
    return Tensor(std::move(shape_), std::move(d));
}

Tensor Tensor::filled(std::vector<std::size_t> shape_, double value) {
    std::vector<double> d(shape_product(shape_), value);
    return Tensor(std::move(shape_), std::move(d));
}

void Tensor::validate() const {
    if (shape.empty()) throw ContractViolation("tensor: empty shape");
    for (std::size_t e : shape) {
        if (e == 0) throw ContractViolation("tensor: zero extent in shape");
    }
    if (shape_product(shape) != data.size())
        throw ContractViolation("tensor: shape product does not match data length");
    for (double v : data) {
        if (!std::isfinite(v)) throw ContractViolation("tensor: non-finite element");
    }
}

void ProbVector::validate() const {
    if (probs.empty()) throw ContractViolation("probvector: empty");
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0 && p <= 1.0))
            throw ContractViolation("probvector: element outside [0,1]");
        sum += p;
    }
    if (std::fabs(sum - 1.0) > 1e-6)
        throw ContractViolation("probvector: does not sum to 1");
}

Top1 top1(std::span<const double> values) {
    if (values.empty()) throw ContractViolation("top1: empty vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return {best, values[best]};
}

Top1 top1(const ProbVector& v) { return top1(std::span<const double>(v.probs)); }

double l2_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ContractViolation("l2_distance: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

} // namespace devifuzz
