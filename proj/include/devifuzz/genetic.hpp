#pragma once

#include <cstdint>

#include "devifuzz/search.hpp"

namespace devifuzz {

/// k-Uncertainty of one model output: top-1 probability minus k-th highest
/// probability. Small values mean the input sits near that model's decision
/// boundary. k must not exceed the class count.
double k_uncertainty(const ProbVector& out, std::size_t k);

/// Uniform pixel-mask crossover: each pixel comes from either parent with
/// probability 1/2. Identical parents reproduce themselves exactly.
Tensor uniform_pixel_crossover(const Tensor& a, const Tensor& b, Rng& rng);

struct GeneticConfig {
    std::size_t population = 1000;
    std::size_t k = 2;
    double crossover_rate = 1.0; // probability an offspring comes from crossover
    double mutation_rate = 1.0;  // probability an offspring is mutated
    double timeout_s = 240.0;
    std::uint64_t max_queries = 100000;
    std::uint64_t rng_seed = 0;
    std::optional<double> linf_budget;
};

/// Genetic baseline: a pool of mutated seeds evolved by uniform pixel-mask
/// crossover and operator mutation, selecting for low k-uncertainty on
/// either model (min over the two). Same TrialReport contract and query
/// accounting as run_trigger_search. See BASELINE.md for the choices this
/// reimplementation makes.
TrialReport run_genetic_search(ModelPairOracle& oracle, const Tensor& seed, OperatorPool& pool,
                               const GeneticConfig& config);

} // namespace devifuzz
