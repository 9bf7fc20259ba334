#include "devifuzz/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "devifuzz/errors.hpp"
#include "devifuzz/inference.hpp"

namespace devifuzz {

// ─── NnIndex implementations ────────────────────────────────────────────

namespace {

double dist2(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

class LinearScanIndex final : public NnIndex {
public:
    explicit LinearScanIndex(std::size_t dim) : dim_(dim) {}

    void insert(std::vector<double> point) override {
        if (point.size() != dim_) throw ContractViolation("nn index: dimension mismatch");
        points_.push_back(std::move(point));
    }

    bool any_within(std::span<const double> point, double eps) const override {
        const double eps2 = eps * eps;
        for (const auto& p : points_) {
            if (dist2(p, point) <= eps2) return true;
        }
        return false;
    }

    std::size_t size() const override { return points_.size(); }

private:
    std::size_t dim_;
    std::vector<std::vector<double>> points_;
};

/// Incremental kd-tree with cycling split dimension. Same exact answers as
/// the linear scan (the tests assert it); just faster once stores grow.
class KdTreeIndex final : public NnIndex {
public:
    explicit KdTreeIndex(std::size_t dim) : dim_(dim) {}

    void insert(std::vector<double> point) override {
        if (point.size() != dim_) throw ContractViolation("nn index: dimension mismatch");
        nodes_.push_back(Node{std::move(point), -1, -1});
        const int added = static_cast<int>(nodes_.size()) - 1;
        if (added == 0) return;
        int cur = 0;
        std::size_t axis = 0;
        for (;;) {
            Node& n = nodes_[cur];
            int& child = nodes_[added].point[axis] < n.point[axis] ? n.left : n.right;
            if (child < 0) {
                child = added;
                return;
            }
            cur = child;
            axis = (axis + 1) % dim_;
        }
    }

    bool any_within(std::span<const double> point, double eps) const override {
        if (nodes_.empty()) return false;
        const double eps2 = eps * eps;
        // Explicit stack; a lopsided incremental tree can get deep.
        std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
        while (!stack.empty()) {
            const auto [node, axis] = stack.back();
            stack.pop_back();
            const Node& n = nodes_[static_cast<std::size_t>(node)];
            if (dist2(n.point, point) <= eps2) return true;
            const double plane = point[axis] - n.point[axis];
            const std::size_t next_axis = (axis + 1) % dim_;
            const int near = plane < 0.0 ? n.left : n.right;
            const int far = plane < 0.0 ? n.right : n.left;
            if (far >= 0 && std::fabs(plane) <= eps) stack.push_back({far, next_axis});
            if (near >= 0) stack.push_back({near, next_axis});
        }
        return false;
    }

    std::size_t size() const override { return nodes_.size(); }

private:
    struct Node {
        std::vector<double> point;
        int left;
        int right;
    };

    std::size_t dim_;
    std::vector<Node> nodes_;
};

} // namespace

std::unique_ptr<NnIndex> make_nn_index(NnIndexKind kind, std::size_t dim) {
    if (kind == NnIndexKind::kd_tree) return std::make_unique<KdTreeIndex>(dim);
    return std::make_unique<LinearScanIndex>(dim);
}

// ─── StateStore ─────────────────────────────────────────────────────────

bool StateStore::observe(const ProbVector& out_original, const ProbVector& out_compressed) {
    std::vector<double> point;
    point.reserve(out_original.size() + out_compressed.size());
    point.insert(point.end(), out_original.probs.begin(), out_original.probs.end());
    point.insert(point.end(), out_compressed.probs.begin(), out_compressed.probs.end());

    if (!index_) index_ = make_nn_index(kind_, point.size());
    const bool novel = !index_->any_within(point, epsilon_);
    index_->insert(std::move(point));
    return novel;
}

// ─── Fitness ────────────────────────────────────────────────────────────

double top1_distance(const ProbVector& out_original, const ProbVector& out_compressed) {
    return std::fabs(top1(out_original).prob - top1(out_compressed).prob);
}

double fitness_value(double distance, bool novel, double delta) {
    return distance / delta + (novel ? 1.0 : 0.0);
}

double fitness(const ProbVector& out_original, const ProbVector& out_compressed,
               StateStore& store, double delta) {
    const double d = top1_distance(out_original, out_compressed);
    const bool novel = store.observe(out_original, out_compressed);
    return fitness_value(d, novel, delta);
}

// ─── Operator selection ─────────────────────────────────────────────────

double acceptance_probability(std::size_t k_candidate, std::size_t k_previous,
                              std::size_t pool_size) {
    const double p = 1.0 / static_cast<double>(pool_size);
    const double raw = std::pow(1.0 - p, static_cast<double>(k_candidate) -
                                             static_cast<double>(k_previous));
    return std::min(1.0, raw);
}

namespace {

/// Operator ids sorted by ranking value, best first; ties keep pool order.
std::vector<int> rank_order(const OperatorPool& pool) {
    std::vector<int> order;
    order.reserve(pool.size());
    for (const MutationOperator& op : pool) order.push_back(op.id());
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return pool.at(a).ranking() > pool.at(b).ranking();
    });
    return order;
}

} // namespace

int select_operator(const OperatorPool& pool, int previous_id, Rng& rng, SelectionProbe* probe) {
    if (pool.empty()) throw ContractViolation("select_operator: empty pool");
    const std::vector<int> order = rank_order(pool);
    const std::size_t k_prev = static_cast<std::size_t>(
        std::find(order.begin(), order.end(), previous_id) - order.begin());
    if (k_prev == order.size())
        throw ContractViolation("select_operator: previous operator not in pool");

    for (;;) {
        const std::size_t k_cand = rng.uniform_index(order.size());
        const double p_accept = acceptance_probability(k_cand, k_prev, pool.size());
        const bool accepted = rng.uniform() < p_accept;
        if (probe)
            probe->proposals.push_back(
                {static_cast<long>(k_cand) - static_cast<long>(k_prev), accepted});
        if (accepted) return order[k_cand];
    }
}

// ─── Search driver ──────────────────────────────────────────────────────

const char* search_mode_name(SearchMode m) {
    switch (m) {
        case SearchMode::full: return "full";
        case SearchMode::distance_only: return "distance_only";
        case SearchMode::random_ops: return "random_ops";
    }
    return "?";
}

SearchMode search_mode_from_name(const std::string& name) {
    if (name == "full") return SearchMode::full;
    if (name == "distance_only") return SearchMode::distance_only;
    if (name == "random_ops") return SearchMode::random_ops;
    throw DataError("unknown search mode: " + name);
}

ModelPairOracle ModelPairOracle::from_models(const ModelGraph& original,
                                             const ModelGraph& compressed) {
    return ModelPairOracle([&original](const Tensor& x) { return predict(original, x); },
                           [&compressed](const Tensor& x) { return predict(compressed, x); });
}

namespace {

std::vector<OperatorUsage> collect_usage(const OperatorPool& pool) {
    std::vector<OperatorUsage> usage;
    usage.reserve(pool.size());
    for (const MutationOperator& op : pool)
        usage.push_back({op.id(), op.name(), op.applied_count(), op.improved_count()});
    return usage;
}

void clamp_to_budget(Tensor& x, const Tensor& seed, double budget) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lo = std::max(0.0, seed.data[i] - budget);
        const double hi = std::min(1.0, seed.data[i] + budget);
        x.data[i] = std::clamp(x.data[i], lo, hi);
    }
}

} // namespace

TrialReport run_trigger_search(ModelPairOracle& oracle, const Tensor& seed, OperatorPool& pool,
                               const SearchConfig& config, StateStore* shared_store) {
    if (pool.empty()) throw ContractViolation("run_trigger_search: empty operator pool");
    if (config.max_queries == 0)
        throw ContractViolation("run_trigger_search: zero query budget");

    using Clock = std::chrono::steady_clock;
    const auto t0 = Clock::now();
    const auto deadline = t0 + std::chrono::duration_cast<Clock::duration>(
                                   std::chrono::duration<double>(config.timeout_s));
    const std::uint64_t start_queries = oracle.query_count();
    const bool track_states = config.mode != SearchMode::distance_only;

    Rng rng(config.rng_seed);
    StateStore local_store(config.epsilon_nn, config.index);
    StateStore& store = shared_store ? *shared_store : local_store;

    TrialReport report;
    auto finish = [&](bool success) {
        report.success = success;
        report.queries = oracle.query_count() - start_queries;
        report.wall_time_ms =
            std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
        report.operator_usage = collect_usage(pool);
        return report;
    };

    // Initial query: seeds are expected to be non-triggering, but one that
    // already triggers is simply an immediate success.
    ModelPairOracle::Result out = oracle.query(seed);
    if (top1(out.original).label != top1(out.compressed).label) {
        report.trigger = seed;
        report.original_out = out.original;
        report.compressed_out = out.compressed;
        return finish(true);
    }

    double incumbent_fitness =
        track_states ? fitness(out.original, out.compressed, store, config.delta)
                     : top1_distance(out.original, out.compressed);
    Tensor incumbent = seed;

    int op_id = pool.at(static_cast<int>(rng.uniform_index(pool.size()))).id();

    for (;;) {
        if (oracle.query_count() - start_queries >= config.max_queries) break;
        if (Clock::now() >= deadline) break;

        MutationOperator& op = pool.at(op_id);
        op.record_applied();
        Tensor x = op.apply(incumbent, rng);
        if (config.linf_budget) clamp_to_budget(x, seed, *config.linf_budget);

        out = oracle.query(x);
        ++report.iterations;

        if (top1(out.original).label != top1(out.compressed).label) {
            report.trigger = std::move(x);
            report.original_out = out.original;
            report.compressed_out = out.compressed;
            return finish(true);
        }

        const double h = track_states
                             ? fitness(out.original, out.compressed, store, config.delta)
                             : top1_distance(out.original, out.compressed);
        if (h >= incumbent_fitness) {
            incumbent = std::move(x);
            incumbent_fitness = h;
            op.record_improved();
        }
        if (config.record_fitness_trace) report.fitness_trace.push_back(incumbent_fitness);

        op_id = config.mode == SearchMode::random_ops
                    ? pool.at(static_cast<int>(rng.uniform_index(pool.size()))).id()
                    : select_operator(pool, op_id, rng);
    }
    return finish(false);
}

} // namespace devifuzz
