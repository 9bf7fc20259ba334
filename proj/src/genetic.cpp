#include "devifuzz/genetic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "devifuzz/errors.hpp"

namespace devifuzz {

double k_uncertainty(const ProbVector& out, std::size_t k) {
    if (k == 0 || k > out.size())
        throw ContractViolation("k_uncertainty: k out of range");
    std::vector<double> sorted = out.probs;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    return sorted[0] - sorted[k - 1];
}

Tensor uniform_pixel_crossover(const Tensor& a, const Tensor& b, Rng& rng) {
    if (a.shape != b.shape) throw ContractViolation("crossover: shape mismatch");
    Tensor child = a;
    for (std::size_t i = 0; i < child.size(); ++i) {
        if (rng.coin()) child.data[i] = b.data[i];
    }
    return child;
}

namespace {

struct Individual {
    Tensor input;
    double fitness; // min k-uncertainty over the two models; lower is better
};

void clamp_to_budget(Tensor& x, const Tensor& seed, double budget) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lo = std::max(0.0, seed.data[i] - budget);
        const double hi = std::min(1.0, seed.data[i] + budget);
        x.data[i] = std::clamp(x.data[i], lo, hi);
    }
}

} // namespace

TrialReport run_genetic_search(ModelPairOracle& oracle, const Tensor& seed, OperatorPool& pool,
                               const GeneticConfig& config) {
    if (pool.empty()) throw ContractViolation("run_genetic_search: empty operator pool");
    if (config.population < 2)
        throw ContractViolation("run_genetic_search: population must be at least 2");
    if (config.max_queries == 0)
        throw ContractViolation("run_genetic_search: zero query budget");

    using Clock = std::chrono::steady_clock;
    const auto t0 = Clock::now();
    const auto deadline = t0 + std::chrono::duration_cast<Clock::duration>(
                                   std::chrono::duration<double>(config.timeout_s));
    const std::uint64_t start_queries = oracle.query_count();

    Rng rng(config.rng_seed);
    TrialReport report;
    auto finish = [&](bool success) {
        report.success = success;
        report.queries = oracle.query_count() - start_queries;
        report.wall_time_ms =
            std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
        report.operator_usage.clear();
        for (const MutationOperator& op : pool)
            report.operator_usage.push_back(
                {op.id(), op.name(), op.applied_count(), op.improved_count()});
        return report;
    };
    auto out_of_budget = [&] {
        return oracle.query_count() - start_queries >= config.max_queries ||
               Clock::now() >= deadline;
    };

    // Evaluates a candidate; fills the report and returns true on a trigger.
    auto evaluate = [&](Tensor x, Individual& slot) {
        ModelPairOracle::Result out = oracle.query(x);
        if (top1(out.original).label != top1(out.compressed).label) {
            report.trigger = std::move(x);
            report.original_out = out.original;
            report.compressed_out = out.compressed;
            return true;
        }
        slot.input = std::move(x);
        slot.fitness = std::min(k_uncertainty(out.original, config.k),
                                k_uncertainty(out.compressed, config.k));
        return false;
    };

    // Seed check (also catches seeds that already trigger).
    {
        Individual probe;
        if (evaluate(seed, probe)) return finish(true);
    }

    // Initial pool: mutants of the seed via random operators.
    std::vector<Individual> population;
    population.reserve(config.population);
    while (population.size() < config.population) {
        if (out_of_budget()) return finish(false);
        MutationOperator& op = pool.at(static_cast<int>(rng.uniform_index(pool.size())));
        op.record_applied();
        Tensor x = op.apply(seed, rng);
        if (config.linf_budget) clamp_to_budget(x, seed, *config.linf_budget);
        Individual ind;
        if (evaluate(std::move(x), ind)) return finish(true);
        population.push_back(std::move(ind));
    }

    auto by_fitness = [](const Individual& a, const Individual& b) {
        return a.fitness < b.fitness;
    };

    for (;;) {
        ++report.iterations; // one generation
        std::stable_sort(population.begin(), population.end(), by_fitness);

        // Truncation selection: parents come from the better half.
        const std::size_t parent_count = std::max<std::size_t>(2, population.size() / 2);
        std::vector<Individual> offspring;
        offspring.reserve(population.size());
        while (offspring.size() < population.size()) {
            if (out_of_budget()) return finish(false);
            const Individual& pa = population[rng.uniform_index(parent_count)];
            const Individual& pb = population[rng.uniform_index(parent_count)];
            Tensor child = rng.uniform() < config.crossover_rate
                               ? uniform_pixel_crossover(pa.input, pb.input, rng)
                               : pa.input;
            if (rng.uniform() < config.mutation_rate) {
                MutationOperator& op =
                    pool.at(static_cast<int>(rng.uniform_index(pool.size())));
                op.record_applied();
                child = op.apply(child, rng);
            }
            if (config.linf_budget) clamp_to_budget(child, seed, *config.linf_budget);
            Individual ind;
            if (evaluate(std::move(child), ind)) return finish(true);
            offspring.push_back(std::move(ind));
        }

        // Offspring are fed back selectively: merge and keep the best
        // population-size individuals, so the population size is constant.
        population.insert(population.end(), std::make_move_iterator(offspring.begin()),
                          std::make_move_iterator(offspring.end()));
        std::stable_sort(population.begin(), population.end(), by_fitness);
        population.resize(config.population);
    }
}

} // namespace devifuzz
