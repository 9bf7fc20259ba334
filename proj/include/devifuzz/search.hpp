#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "devifuzz/model.hpp"
#include "devifuzz/mutation.hpp"
#include "devifuzz/rng.hpp"
#include "devifuzz/tensor.hpp"

namespace devifuzz {

// ─── Black-box model pair ───────────────────────────────────────────────

/// A pair of predict functions with exact query accounting: one query means
/// one input fed to both models.
class ModelPairOracle {
public:
    using Predict = std::function<ProbVector(const Tensor&)>;

    ModelPairOracle(Predict original, Predict compressed)
        : original_(std::move(original)), compressed_(std::move(compressed)) {}

    static ModelPairOracle from_models(const ModelGraph& original, const ModelGraph& compressed);

    struct Result {
        ProbVector original;
        ProbVector compressed;
    };

    Result query(const Tensor& x) {
        ++queries_;
        return {original_(x), compressed_(x)};
    }

    std::uint64_t query_count() const { return queries_; }

private:
    Predict original_;
    Predict compressed_;
    std::uint64_t queries_ = 0;
};

// ─── Observed-state novelty store ───────────────────────────────────────

enum class NnIndexKind { linear_scan, kd_tree };

/// Point index answering "is any stored point within radius eps?" exactly.
class NnIndex {
public:
    virtual ~NnIndex() = default;
    virtual void insert(std::vector<double> point) = 0;
    virtual bool any_within(std::span<const double> point, double eps) const = 0;
    virtual std::size_t size() const = 0;
};

std::unique_ptr<NnIndex> make_nn_index(NnIndexKind kind, std::size_t dim);

/// Set of observed (f(x), g(x)) pairs, each a concatenated 2n-dim point.
/// observe() answers the novelty bit (1 iff no stored point lies within
/// epsilon) and then records the queried state, so every queried input's
/// state ends up in the store.
class StateStore {
public:
    explicit StateStore(double epsilon, NnIndexKind kind = NnIndexKind::linear_scan)
        : epsilon_(epsilon), kind_(kind) {}

    bool observe(const ProbVector& out_original, const ProbVector& out_compressed);

    std::size_t size() const { return index_ ? index_->size() : 0; }
    double epsilon() const { return epsilon_; }

private:
    double epsilon_;
    NnIndexKind kind_;
    std::unique_ptr<NnIndex> index_;
};

// ─── Fitness ────────────────────────────────────────────────────────────

/// Distance between two same-label outputs: |p_top1(f) - p_top1(g)|.
double top1_distance(const ProbVector& out_original, const ProbVector& out_compressed);

/// delta^-1 * distance + novelty. A distance edge of at least delta always
/// dominates the novelty bit.
double fitness_value(double distance, bool novel, double delta);

/// Composed fitness for a non-triggering query: computes the distance,
/// resolves the novelty bit against the store (recording the state), and
/// combines them.
double fitness(const ProbVector& out_original, const ProbVector& out_compressed,
               StateStore& store, double delta);

// ─── Operator selection ─────────────────────────────────────────────────

/// min(1, (1-p)^(k_candidate - k_previous)) with p = 1/pool_size; ranks come
/// from sorting operators by ranking value, best first.
double acceptance_probability(std::size_t k_candidate, std::size_t k_previous,
                              std::size_t pool_size);

/// Optional recorder for proposal-level statistics (used by tests).
struct SelectionProbe {
    struct Proposal {
        long rank_delta;
        bool accepted;
    };
    std::vector<Proposal> proposals;
};

/// Metropolis-Hastings step over the rank-sorted pool: draw uniform
/// candidates, accept each with acceptance_probability, return the first
/// accepted. Terminates with probability 1 because the previous operator's
/// own rank is always accepted.
int select_operator(const OperatorPool& pool, int previous_id, Rng& rng,
                    SelectionProbe* probe = nullptr);

// ─── Search driver ──────────────────────────────────────────────────────

enum class SearchMode {
    full,          // distance + novelty fitness, MH operator selection
    distance_only, // fitness is the raw distance; no state tracking
    random_ops     // full fitness, uniform random operator selection
};

const char* search_mode_name(SearchMode m);
SearchMode search_mode_from_name(const std::string& name);

struct SearchConfig {
    double delta = 1e-3;
    double epsilon_nn = 1e-2;
    double timeout_s = 240.0;
    std::uint64_t max_queries = 100000;
    SearchMode mode = SearchMode::full;
    std::uint64_t rng_seed = 0;
    NnIndexKind index = NnIndexKind::linear_scan;
    // Optional L-inf ball around the seed; off by default (mutations are
    // bounded only by the [0,1] pixel range).
    std::optional<double> linf_budget;
    // Test hook: record the incumbent fitness after every iteration.
    bool record_fitness_trace = false;
};

struct OperatorUsage {
    int id = 0;
    std::string name;
    std::uint64_t applied = 0;
    std::uint64_t improved = 0;
};

struct TrialReport {
    bool success = false;
    std::optional<Tensor> trigger;
    std::optional<ProbVector> original_out;  // outputs on the trigger
    std::optional<ProbVector> compressed_out;
    std::uint64_t queries = 0;
    double wall_time_ms = 0.0;
    std::uint64_t iterations = 0;
    std::vector<OperatorUsage> operator_usage;
    std::vector<double> fitness_trace; // filled when record_fitness_trace
    std::string diagnostic;            // set when a trial aborted on an error
};

/// The main mutate-query-select loop. One initial query checks the seed (a
/// seed that already triggers is an immediate success); afterwards each
/// iteration mutates the incumbent, queries both models, returns on label
/// disagreement, otherwise keeps the candidate iff its fitness is at least
/// the incumbent's. Stops at max_queries or timeout with success=false.
/// When `shared_store` is given it is used instead of a per-run store.
TrialReport run_trigger_search(ModelPairOracle& oracle, const Tensor& seed, OperatorPool& pool,
                               const SearchConfig& config, StateStore* shared_store = nullptr);

} // namespace devifuzz
