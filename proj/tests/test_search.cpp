#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <map>

#include "devifuzz/bench.hpp"
#include "devifuzz/compress.hpp"
#include "devifuzz/dataset.hpp"
#include "devifuzz/inference.hpp"
#include "devifuzz/search.hpp"

using namespace devifuzz;

namespace {

ProbVector random_prob_vector(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    double sum = 0.0;
    for (double& x : v) {
        x = 0.01 + rng.uniform();
        sum += x;
    }
    for (double& x : v) x /= sum;
    return ProbVector{std::move(v)};
}

/// 2-input 2-class linear softmax model; w00 scales the first logit.
ModelGraph linear_pair_model(float w00) {
    ModelGraph g;
    g.manifest.name = "linear2";
    g.manifest.input_shape = {2};
    LayerSpec l;
    l.kind = LayerKind::dense;
    l.in = 2;
    l.out = 2;
    l.weight_offset = 0;
    l.weight_len = 4;
    l.bias_offset = 4;
    l.bias_len = 2;
    g.manifest.layers.push_back(l);
    g.manifest.layers.push_back({.kind = LayerKind::softmax});
    g.weights = {w00, 0.0f, 0.0f, 1.0f, 0.0f, 0.0f};
    g.validate();
    return g;
}

struct ToyPair {
    ModelGraph original;
    ModelGraph compressed;
    SeedSet seeds;
};

/// The frozen in-repo benchmark pair: blob MLP vs its 8-bit quantization.
ToyPair make_toy_pair(std::size_t seeds_per_class) {
    SyntheticSpec spec;
    spec.classes = 10;
    spec.train_per_class = 100;
    spec.test_per_class = 50;
    spec.image_shape = {1, 8, 8};
    spec.noise_sigma = 0.62;
    spec.seed = 7;
    const SyntheticDataset ds = make_synthetic(spec);

    MlpTrainConfig cfg;
    cfg.hidden_sizes = {64};
    cfg.epochs = 12;
    cfg.learning_rate = 0.08;
    cfg.batch_size = 32;
    cfg.rng_seed = 1;
    ToyPair pair;
    pair.original = train_mlp(ds.train, cfg).model;
    pair.compressed = quantize_model(pair.original);
    pair.seeds = select_seeds(ds.test, pair.original, pair.compressed, seeds_per_class, 1);
    return pair;
}

} // namespace

// ─── distance, novelty, fitness ─────────────────────────────────────────

TEST_CASE("top1_distance is zero for identical outputs") {
    const ProbVector a{{0.2, 0.8}};
    CHECK(top1_distance(a, a) == 0.0);
}

TEST_CASE("top1_distance is the absolute top-1 probability gap") {
    const ProbVector a{{0.1, 0.9}};
    const ProbVector b{{0.3, 0.7}};
    CHECK(top1_distance(a, b) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(top1_distance(a, b) == top1_distance(b, a));
}

TEST_CASE("an empty store makes any state novel") {
    StateStore store(1e-2);
    Rng rng(3);
    CHECK(store.observe(random_prob_vector(5, rng), random_prob_vector(5, rng)));
    CHECK(store.size() == 1);
}

TEST_CASE("an exact repeat of a stored state is not novel") {
    StateStore store(1e-2);
    Rng rng(4);
    const ProbVector f = random_prob_vector(5, rng);
    const ProbVector g = random_prob_vector(5, rng);
    CHECK(store.observe(f, g));
    CHECK_FALSE(store.observe(f, g));
    CHECK(store.size() == 2); // every queried state is recorded
}

TEST_CASE("novelty agrees with a brute-force scan for both index kinds") {
    Rng rng(71);
    for (int config = 0; config < 20; ++config) {
        const double eps = rng.uniform(0.005, 0.4);
        StateStore linear(eps, NnIndexKind::linear_scan);
        StateStore kd(eps, NnIndexKind::kd_tree);
        std::vector<std::vector<double>> oracle_points;

        auto oracle_observe = [&](const ProbVector& f, const ProbVector& g) {
            std::vector<double> p(f.probs);
            p.insert(p.end(), g.probs.begin(), g.probs.end());
            bool within = false;
            for (const auto& q : oracle_points) {
                double acc = 0.0;
                for (std::size_t i = 0; i < q.size(); ++i)
                    acc += (q[i] - p[i]) * (q[i] - p[i]);
                if (std::sqrt(acc) <= eps) {
                    within = true;
                    break;
                }
            }
            oracle_points.push_back(std::move(p));
            return !within;
        };

        for (int i = 0; i < 200; ++i) {
            const ProbVector f = random_prob_vector(10, rng);
            const ProbVector g = random_prob_vector(10, rng);
            const bool want = oracle_observe(f, g);
            CHECK(linear.observe(f, g) == want);
            CHECK(kd.observe(f, g) == want);
        }
        for (int i = 0; i < 100; ++i) {
            const ProbVector f = random_prob_vector(10, rng);
            const ProbVector g = random_prob_vector(10, rng);
            const bool want = oracle_observe(f, g);
            CHECK(linear.observe(f, g) == want);
            CHECK(kd.observe(f, g) == want);
        }
    }
}

TEST_CASE("fitness combines scaled distance with the novelty bit") {
    CHECK(fitness_value(0.2, true, 1e-3) == doctest::Approx(201.0).epsilon(1e-15));
    CHECK(fitness_value(0.0, false, 1e-3) == 0.0);
    // Equal distance, one novel: the novel one is strictly larger.
    CHECK(fitness_value(0.05, true, 1e-3) > fitness_value(0.05, false, 1e-3));
}

TEST_CASE("composed fitness records the queried state as it scores it") {
    StateStore store(1e-2);
    const ProbVector f{{0.15, 0.85}};
    const ProbVector g{{0.35, 0.65}};
    // First sight: novel against the empty store.
    CHECK(fitness(f, g, store, 1e-3) ==
          doctest::Approx(fitness_value(0.2, true, 1e-3)).epsilon(1e-12));
    CHECK(store.size() == 1);
    // Same outputs again: the state is now known.
    CHECK(fitness(f, g, store, 1e-3) ==
          doctest::Approx(fitness_value(0.2, false, 1e-3)).epsilon(1e-12));
    CHECK(store.size() == 2);
}

TEST_CASE("a distance edge of at least delta dominates the novelty bit") {
    Rng rng(15);
    const double delta = 1e-3;
    for (int trial = 0; trial < 2000; ++trial) {
        const double da = rng.uniform();
        const double db = rng.uniform();
        if (std::fabs(da - db) < delta) continue;
        const bool novel_a = rng.coin();
        const bool novel_b = rng.coin();
        const double ha = fitness_value(da, novel_a, delta);
        const double hb = fitness_value(db, novel_b, delta);
        CHECK(((da > db) == (ha > hb)));
    }
}

// ─── operator selection ─────────────────────────────────────────────────

TEST_CASE("acceptance probability follows (1-p)^rank-gap") {
    // Pool of 4: p = 0.25, two ranks worse -> 0.75^2.
    CHECK(acceptance_probability(3, 1, 4) == doctest::Approx(0.5625).epsilon(1e-15));
    CHECK(acceptance_probability(2, 2, 4) == 1.0);
    // Better-ranked candidates clamp to 1.
    CHECK(acceptance_probability(0, 3, 4) == 1.0);
}

TEST_CASE("select_operator accepts the previous operator's rank immediately") {
    OperatorPool pool = make_default_pool();
    Rng rng(1);
    for (int i = 0; i < 100; ++i) {
        const int got = select_operator(pool, 2, rng);
        CHECK(got >= 0);
        CHECK(got < static_cast<int>(pool.size()));
    }
}

TEST_CASE("select_operator acceptance frequencies match the MH rule") {
    // Frozen rankings: op1=0.9, op2=0.5, op0=0.2, op3=0.0 (ranks 0..3).
    OperatorPool pool = make_default_pool();
    auto prime = [&](int id, int applied, int improved) {
        for (int i = 0; i < applied; ++i) pool.at(id).record_applied();
        for (int i = 0; i < improved; ++i) pool.at(id).record_improved();
    };
    prime(0, 10, 2);
    prime(1, 10, 9);
    prime(2, 10, 5);
    prime(3, 10, 0);

    Rng rng(2024);
    SelectionProbe probe;
    const int previous = 2; // rank 1 in the sorted order
    for (int i = 0; i < 100000; ++i) select_operator(pool, previous, rng, &probe);

    std::map<long, std::pair<std::size_t, std::size_t>> by_gap; // gap -> (accepted, total)
    for (const auto& p : probe.proposals) {
        auto& [acc, tot] = by_gap[p.rank_delta];
        if (p.accepted) ++acc;
        ++tot;
    }
    // Gaps -1, 0, 1, 2 all occur; each proposal is Bernoulli(min(1,0.75^gap)).
    REQUIRE(by_gap.size() == 4);
    for (const auto& [gap, counts] : by_gap) {
        const auto [accepted, total] = counts;
        const double expected = std::min(1.0, std::pow(0.75, static_cast<double>(gap)));
        const double freq = static_cast<double>(accepted) / static_cast<double>(total);
        const double sigma =
            std::sqrt(expected * (1.0 - expected) / static_cast<double>(total));
        CHECK(std::fabs(freq - expected) <= 3.0 * sigma + 1e-12);
    }
}

TEST_CASE("select_operator prefers higher-ranked operators overall") {
    OperatorPool pool = make_default_pool();
    for (int i = 0; i < 10; ++i) pool.at(1).record_applied();
    for (int i = 0; i < 9; ++i) pool.at(1).record_improved();
    for (int i = 0; i < 10; ++i) pool.at(3).record_applied();

    Rng rng(7);
    std::map<int, int> counts;
    int prev = 0;
    for (int i = 0; i < 20000; ++i) {
        prev = select_operator(pool, prev, rng);
        ++counts[prev];
    }
    CHECK(counts[1] > counts[3]);
}

// ─── run_trigger_search ─────────────────────────────────────────────────

TEST_CASE("identical models never trigger and the budget is exhausted") {
    const ModelGraph m = linear_pair_model(1.0f);
    ModelPairOracle oracle = ModelPairOracle::from_models(m, m);
    OperatorPool pool = make_default_pool();
    SearchConfig cfg;
    cfg.max_queries = 300;
    cfg.rng_seed = 5;
    const Tensor seed({2}, {0.3, 0.6});
    const TrialReport r = run_trigger_search(oracle, seed, pool, cfg);
    CHECK_FALSE(r.success);
    CHECK(r.queries == 300);
    CHECK(r.iterations == 299); // one query went to the seed check
    CHECK(oracle.query_count() == 300);
}

TEST_CASE("the search finds a trigger for a perturbed linear pair") {
    const ModelGraph f = linear_pair_model(1.0f);
    const ModelGraph g = linear_pair_model(1.05f);
    ModelPairOracle oracle = ModelPairOracle::from_models(f, g);
    OperatorPool pool = make_default_pool();
    SearchConfig cfg;
    cfg.max_queries = 20000;
    cfg.rng_seed = 3;
    const Tensor seed({2}, {0.3, 0.6});

    const TrialReport r = run_trigger_search(oracle, seed, pool, cfg);
    REQUIRE(r.success);
    REQUIRE(r.trigger.has_value());
    // Re-verify from scratch: the stored input must deviate.
    const Top1 tf = top1(predict(f, *r.trigger));
    const Top1 tg = top1(predict(g, *r.trigger));
    CHECK(tf.label != tg.label);
    // The stored outputs match a fresh evaluation.
    CHECK(top1(*r.original_out).label == tf.label);
    CHECK(top1(*r.compressed_out).label == tg.label);
}

TEST_CASE("a seed that already triggers is an immediate success") {
    const ModelGraph f = linear_pair_model(1.0f);
    const ModelGraph g = linear_pair_model(1.05f);
    ModelPairOracle oracle = ModelPairOracle::from_models(f, g);
    OperatorPool pool = make_default_pool();
    SearchConfig cfg;
    const Tensor seed({2}, {0.5, 0.51}); // inside the disagreement strip
    REQUIRE(top1(predict(f, seed)).label != top1(predict(g, seed)).label);
    const TrialReport r = run_trigger_search(oracle, seed, pool, cfg);
    CHECK(r.success);
    CHECK(r.queries == 1);
    CHECK(r.iterations == 0);
    CHECK(*r.trigger == seed);
}

TEST_CASE("reported queries equal mutated evaluations plus the seed check") {
    const ModelGraph f = linear_pair_model(1.0f);
    const ModelGraph g = linear_pair_model(1.05f);
    for (std::uint64_t seed_val : {1ULL, 2ULL, 3ULL, 4ULL}) {
        ModelPairOracle oracle = ModelPairOracle::from_models(f, g);
        OperatorPool pool = make_default_pool();
        SearchConfig cfg;
        cfg.max_queries = 5000;
        cfg.rng_seed = seed_val;
        const TrialReport r = run_trigger_search(oracle, Tensor({2}, {0.3, 0.6}), pool, cfg);
        CHECK(r.queries == r.iterations + 1);
        CHECK(r.queries == oracle.query_count());
    }
}

TEST_CASE("incumbent fitness never decreases within a run") {
    const ModelGraph f = linear_pair_model(1.0f);
    const ModelGraph g = linear_pair_model(1.02f);
    ModelPairOracle oracle = ModelPairOracle::from_models(f, g);
    OperatorPool pool = make_default_pool();
    SearchConfig cfg;
    cfg.max_queries = 2000;
    cfg.rng_seed = 11;
    cfg.record_fitness_trace = true;
    const TrialReport r = run_trigger_search(oracle, Tensor({2}, {0.2, 0.7}), pool, cfg);
    REQUIRE(!r.fitness_trace.empty());
    for (std::size_t i = 1; i < r.fitness_trace.size(); ++i)
        CHECK(r.fitness_trace[i] >= r.fitness_trace[i - 1]);
}

TEST_CASE("search traces are bit-reproducible for a fixed seed") {
    const ModelGraph f = linear_pair_model(1.0f);
    const ModelGraph g = linear_pair_model(1.05f);
    auto run_once = [&] {
        ModelPairOracle oracle = ModelPairOracle::from_models(f, g);
        OperatorPool pool = make_default_pool();
        SearchConfig cfg;
        cfg.max_queries = 20000;
        cfg.rng_seed = 42;
        return run_trigger_search(oracle, Tensor({2}, {0.3, 0.6}), pool, cfg);
    };
    const TrialReport a = run_once();
    const TrialReport b = run_once();
    CHECK(a.success == b.success);
    CHECK(a.queries == b.queries);
    CHECK(a.iterations == b.iterations);
    REQUIRE(a.trigger.has_value());
    REQUIRE(b.trigger.has_value());
    CHECK(*a.trigger == *b.trigger);
    REQUIRE(a.operator_usage.size() == b.operator_usage.size());
    for (std::size_t i = 0; i < a.operator_usage.size(); ++i) {
        CHECK(a.operator_usage[i].applied == b.operator_usage[i].applied);
        CHECK(a.operator_usage[i].improved == b.operator_usage[i].improved);
    }
}

TEST_CASE("ablation modes run and report the same contract") {
    const ModelGraph f = linear_pair_model(1.0f);
    const ModelGraph g = linear_pair_model(1.05f);
    for (SearchMode mode : {SearchMode::distance_only, SearchMode::random_ops}) {
        ModelPairOracle oracle = ModelPairOracle::from_models(f, g);
        OperatorPool pool = make_default_pool();
        SearchConfig cfg;
        cfg.mode = mode;
        cfg.max_queries = 20000;
        cfg.rng_seed = 9;
        const TrialReport r = run_trigger_search(oracle, Tensor({2}, {0.3, 0.6}), pool, cfg);
        REQUIRE(r.success);
        CHECK(top1(predict(f, *r.trigger)).label != top1(predict(g, *r.trigger)).label);
        CHECK(r.queries == r.iterations + 1);
    }
}

TEST_CASE("an L-inf budget confines the search to a ball around the seed") {
    const ModelGraph f = linear_pair_model(1.0f);
    const ModelGraph g = linear_pair_model(1.05f);
    const Tensor seed({2}, {0.3, 0.6});

    // Zero budget pins every mutant to the seed; nothing can trigger.
    {
        ModelPairOracle oracle = ModelPairOracle::from_models(f, g);
        OperatorPool pool = make_default_pool();
        SearchConfig cfg;
        cfg.max_queries = 200;
        cfg.rng_seed = 1;
        cfg.linf_budget = 0.0;
        const TrialReport r = run_trigger_search(oracle, seed, pool, cfg);
        CHECK_FALSE(r.success);
    }
    // A generous budget still allows success, and the trigger respects it.
    {
        ModelPairOracle oracle = ModelPairOracle::from_models(f, g);
        OperatorPool pool = make_default_pool();
        SearchConfig cfg;
        cfg.max_queries = 50000;
        cfg.rng_seed = 1;
        cfg.linf_budget = 0.35;
        const TrialReport r = run_trigger_search(oracle, seed, pool, cfg);
        REQUIRE(r.success);
        for (std::size_t i = 0; i < seed.size(); ++i)
            CHECK(std::fabs(r.trigger->data[i] - seed.data[i]) <= 0.35 + 1e-12);
    }
}

TEST_CASE("a wrong-shaped seed is a contract violation") {
    const ModelGraph f = linear_pair_model(1.0f);
    ModelPairOracle oracle = ModelPairOracle::from_models(f, f);
    OperatorPool pool = make_default_pool();
    SearchConfig cfg;
    CHECK_THROWS_AS(run_trigger_search(oracle, Tensor({3}, {0.1, 0.2, 0.3}), pool, cfg),
                    ContractViolation);
}

TEST_CASE("kd-tree and linear-scan stores drive identical searches") {
    const ModelGraph f = linear_pair_model(1.0f);
    const ModelGraph g = linear_pair_model(1.05f);
    auto run_with = [&](NnIndexKind kind) {
        ModelPairOracle oracle = ModelPairOracle::from_models(f, g);
        OperatorPool pool = make_default_pool();
        SearchConfig cfg;
        cfg.max_queries = 20000;
        cfg.rng_seed = 17;
        cfg.index = kind;
        return run_trigger_search(oracle, Tensor({2}, {0.3, 0.6}), pool, cfg);
    };
    const TrialReport a = run_with(NnIndexKind::linear_scan);
    const TrialReport b = run_with(NnIndexKind::kd_tree);
    CHECK(a.success == b.success);
    CHECK(a.queries == b.queries);
    REQUIRE(a.trigger.has_value());
    REQUIRE(b.trigger.has_value());
    CHECK(*a.trigger == *b.trigger);
}

TEST_CASE("the toy pair regression holds: every seed yields a trigger") {
    // Frozen protocol: blob MLP (sigma 0.62, seed 7) vs 8-bit quantization,
    // 30 seeds, full mode. Measured once: all succeed, medians well under
    // the bounds asserted here.
    const ToyPair pair = make_toy_pair(3);
    REQUIRE(pair.seeds.size() == 30);

    std::vector<std::uint64_t> queries;
    for (std::size_t s = 0; s < pair.seeds.size(); ++s) {
        ModelPairOracle oracle = ModelPairOracle::from_models(pair.original, pair.compressed);
        OperatorPool pool = make_default_pool();
        SearchConfig cfg;
        cfg.max_queries = 100000;
        cfg.rng_seed = derive_seed(1, s, 0);
        cfg.index = NnIndexKind::kd_tree;
        const TrialReport r = run_trigger_search(oracle, pair.seeds.images[s], pool, cfg);
        REQUIRE(r.success);
        queries.push_back(r.queries);
        const Top1 tf = top1(predict(pair.original, *r.trigger));
        const Top1 tg = top1(predict(pair.compressed, *r.trigger));
        CHECK(tf.label != tg.label);
    }
    std::sort(queries.begin(), queries.end());
    CHECK(queries[queries.size() / 2] <= 500);
}
