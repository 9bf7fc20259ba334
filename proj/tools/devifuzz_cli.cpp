// devifuzz command line driver: model preparation, seed selection, single
// searches and full benchmark runs.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "devifuzz/bench.hpp"
#include "devifuzz/compress.hpp"
#include "devifuzz/dataset.hpp"
#include "devifuzz/errors.hpp"
#include "devifuzz/inference.hpp"
#include "devifuzz/model_io.hpp"

namespace {

using namespace devifuzz;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitExperiment = 3;

struct DatasetArgs {
    std::string images;
    std::string labels;
    bool synthetic = false;
    std::size_t classes = 10;
    std::size_t train_per_class = 200;
    std::size_t test_per_class = 100;
    std::vector<std::size_t> shape = {1, 8, 8};
    double sigma = 0.25;
    std::uint64_t seed = 7;

    void attach(CLI::App* cmd) {
        cmd->add_option("--images", images, "IDX image file");
        cmd->add_option("--labels", labels, "IDX label file");
        cmd->add_flag("--synthetic", synthetic, "use the in-tree synthetic dataset");
        cmd->add_option("--classes", classes, "synthetic: class count");
        cmd->add_option("--train-per-class", train_per_class, "synthetic: training samples per class");
        cmd->add_option("--test-per-class", test_per_class, "synthetic: test samples per class");
        cmd->add_option("--shape", shape, "synthetic: image shape, e.g. 1 8 8");
        cmd->add_option("--sigma", sigma, "synthetic: pixel noise sigma");
        cmd->add_option("--data-seed", seed, "synthetic: generator seed");
    }

    SyntheticSpec synthetic_spec() const {
        return SyntheticSpec{classes, train_per_class, test_per_class, shape, sigma, seed};
    }

    LabeledDataset load_single() const {
        if (synthetic) return make_synthetic(synthetic_spec()).test;
        if (images.empty() || labels.empty())
            throw DataError("need --synthetic or both --images and --labels");
        LabeledDataset d;
        d.images = load_idx_images(images);
        d.labels = load_idx_labels(labels);
        std::size_t max_label = 0;
        for (std::size_t l : d.labels) max_label = std::max(max_label, l);
        d.num_classes = max_label + 1;
        d.validate();
        return d;
    }
};

void print_trial_report(const TrialReport& r) {
    std::printf("success: %s\n", r.success ? "yes" : "no");
    std::printf("queries: %llu\n", static_cast<unsigned long long>(r.queries));
    std::printf("iterations: %llu\n", static_cast<unsigned long long>(r.iterations));
    std::printf("time_ms: %.3f\n", r.wall_time_ms);
    if (r.success && r.original_out && r.compressed_out) {
        const Top1 f = top1(*r.original_out);
        const Top1 g = top1(*r.compressed_out);
        std::printf("original: label %zu (p=%.6f)\n", f.label, f.prob);
        std::printf("compressed: label %zu (p=%.6f)\n", g.label, g.prob);
    }
    if (!r.operator_usage.empty()) {
        std::printf("operator usage (applied/improved):\n");
        for (const OperatorUsage& u : r.operator_usage)
            std::printf("  %-16s %llu / %llu\n", u.name.c_str(),
                        static_cast<unsigned long long>(u.applied),
                        static_cast<unsigned long long>(u.improved));
    }
}

void save_trigger_raw(const Tensor& t, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open for write: " + path);
    for (double v : t.data) f.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

int run(int argc, char** argv) {
    CLI::App app{"differential deviation fuzzer for compressed classifiers"};
    app.require_subcommand(1);

    // train ------------------------------------------------------------
    auto* train_cmd = app.add_subcommand("train", "train a dense MLP and save the model pair base");
    DatasetArgs train_data;
    train_data.attach(train_cmd);
    MlpTrainConfig train_cfg;
    std::string train_out;
    train_cmd->add_option("--hidden", train_cfg.hidden_sizes, "hidden layer sizes");
    train_cmd->add_option("--epochs", train_cfg.epochs, "training epochs");
    train_cmd->add_option("--lr", train_cfg.learning_rate, "learning rate");
    train_cmd->add_option("--batch", train_cfg.batch_size, "minibatch size");
    train_cmd->add_option("--seed", train_cfg.rng_seed, "trainer rng seed");
    train_cmd->add_option("--out", train_out, "output model base path")->required();

    // quantize / prune ---------------------------------------------------
    auto* quant_cmd = app.add_subcommand("quantize", "8-bit quantize a saved model");
    std::string quant_in, quant_out;
    quant_cmd->add_option("--in", quant_in, "input model base path")->required();
    quant_cmd->add_option("--out", quant_out, "output model base path")->required();

    auto* prune_cmd = app.add_subcommand("prune", "magnitude-prune a saved model");
    std::string prune_in, prune_out;
    double prune_sparsity = 0.5;
    prune_cmd->add_option("--in", prune_in, "input model base path")->required();
    prune_cmd->add_option("--out", prune_out, "output model base path")->required();
    prune_cmd->add_option("--sparsity", prune_sparsity, "fraction of weights to zero, in [0,1)");

    // select-seeds -------------------------------------------------------
    auto* seeds_cmd = app.add_subcommand("select-seeds", "pick verified non-triggering seeds");
    DatasetArgs seeds_data;
    seeds_data.attach(seeds_cmd);
    std::string seeds_original, seeds_compressed, seeds_out;
    std::size_t seeds_per_class = 50;
    std::uint64_t seeds_seed = 1;
    seeds_cmd->add_option("--original", seeds_original, "original model base path")->required();
    seeds_cmd->add_option("--compressed", seeds_compressed, "compressed model base path")->required();
    seeds_cmd->add_option("--per-class", seeds_per_class, "seeds per class");
    seeds_cmd->add_option("--seed", seeds_seed, "selection rng seed");
    seeds_cmd->add_option("--out", seeds_out, "output base path (-images.idx/-labels.idx)")->required();

    // fuzz ----------------------------------------------------------------
    auto* fuzz_cmd = app.add_subcommand("fuzz", "search for a triggering input from one seed");
    DatasetArgs fuzz_data;
    fuzz_data.attach(fuzz_cmd);
    std::string fuzz_original, fuzz_compressed, fuzz_engine = "trigger", fuzz_mode = "full";
    std::string fuzz_save_trigger;
    std::size_t fuzz_index = 0;
    SearchConfig fuzz_search;
    GeneticConfig fuzz_genetic;
    fuzz_cmd->add_option("--original", fuzz_original, "original model base path")->required();
    fuzz_cmd->add_option("--compressed", fuzz_compressed, "compressed model base path")->required();
    fuzz_cmd->add_option("--index", fuzz_index, "dataset row to use as the seed");
    fuzz_cmd->add_option("--engine", fuzz_engine, "trigger|genetic");
    fuzz_cmd->add_option("--mode", fuzz_mode, "full|distance_only|random_ops");
    fuzz_cmd->add_option("--seed", fuzz_search.rng_seed, "search rng seed");
    fuzz_cmd->add_option("--max-queries", fuzz_search.max_queries, "query budget");
    fuzz_cmd->add_option("--timeout", fuzz_search.timeout_s, "timeout in seconds");
    fuzz_cmd->add_option("--population", fuzz_genetic.population, "genetic population size");
    fuzz_cmd->add_option("--save-trigger", fuzz_save_trigger,
                         "write the triggering input as raw little-endian f64");

    // bench ----------------------------------------------------------------
    auto* bench_cmd = app.add_subcommand("bench", "run a full benchmark from an experiment config");
    std::string bench_config;
    std::string bench_engine, bench_mode, bench_out_dir;
    std::uint64_t bench_seed = 0;
    bool bench_seed_set = false;
    std::size_t bench_reps = 0, bench_per_class = 0, bench_threads = 0;
    bool bench_threads_set = false;
    bench_cmd->add_option("--config", bench_config, "experiment JSON file")->required();
    bench_cmd->add_option("--engine", bench_engine, "override engine");
    bench_cmd->add_option("--mode", bench_mode, "override search mode");
    bench_cmd->add_option("--seed", bench_seed, "override experiment seed")
        ->each([&](const std::string&) { bench_seed_set = true; });
    bench_cmd->add_option("--repetitions", bench_reps, "override repetitions");
    bench_cmd->add_option("--per-class", bench_per_class, "override seeds per class");
    bench_cmd->add_option("--threads", bench_threads, "override worker threads")
        ->each([&](const std::string&) { bench_threads_set = true; });
    bench_cmd->add_option("--out-dir", bench_out_dir, "override output directory");

    // report / histogram ----------------------------------------------------
    auto* report_cmd = app.add_subcommand("report", "recompute aggregates from a report.csv");
    std::string report_csv;
    report_cmd->add_option("--csv", report_csv, "report.csv path")->required();

    auto* hist_cmd = app.add_subcommand("histogram", "query histogram from a report.csv");
    std::string hist_csv, hist_out;
    hist_cmd->add_option("--csv", hist_csv, "report.csv path")->required();
    hist_cmd->add_option("--out", hist_out, "write table here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp") {
            app.exit(e);
            return kExitOk;
        }
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (train_cmd->parsed()) {
            LabeledDataset train_set;
            double test_acc = -1.0;
            if (train_data.synthetic) {
                SyntheticDataset ds = make_synthetic(train_data.synthetic_spec());
                train_set = std::move(ds.train);
                TrainOutcome out = train_mlp(train_set, train_cfg);
                test_acc = accuracy(out.model, ds.test);
                save_model(out.model, train_out);
                std::printf("train accuracy: %.4f\n", out.train_accuracy);
                std::printf("test accuracy: %.4f\n", test_acc);
            } else {
                train_set = train_data.load_single();
                TrainOutcome out = train_mlp(train_set, train_cfg);
                save_model(out.model, train_out);
                std::printf("train accuracy: %.4f\n", out.train_accuracy);
            }
            std::printf("saved %s.manifest / %s.weights\n", train_out.c_str(), train_out.c_str());
            return kExitOk;
        }
        if (quant_cmd->parsed()) {
            const ModelGraph m = load_model(quant_in);
            save_model(quantize_model(m), quant_out);
            std::printf("saved %s.manifest / %s.weights\n", quant_out.c_str(), quant_out.c_str());
            return kExitOk;
        }
        if (prune_cmd->parsed()) {
            const ModelGraph m = load_model(prune_in);
            save_model(prune_model(m, prune_sparsity), prune_out);
            std::printf("saved %s.manifest / %s.weights\n", prune_out.c_str(), prune_out.c_str());
            return kExitOk;
        }
        if (seeds_cmd->parsed()) {
            const ModelGraph original = load_model(seeds_original);
            const ModelGraph compressed = load_model(seeds_compressed);
            const LabeledDataset data = seeds_data.load_single();
            const SeedSet seeds =
                select_seeds(data, original, compressed, seeds_per_class, seeds_seed);
            save_idx_images(seeds.images, seeds_out + "-images.idx");
            save_idx_labels(seeds.labels, seeds_out + "-labels.idx");
            std::printf("selected %zu seeds -> %s-images.idx / %s-labels.idx\n", seeds.size(),
                        seeds_out.c_str(), seeds_out.c_str());
            return kExitOk;
        }
        if (fuzz_cmd->parsed()) {
            const ModelGraph original = load_model(fuzz_original);
            const ModelGraph compressed = load_model(fuzz_compressed);
            const LabeledDataset data = fuzz_data.load_single();
            if (fuzz_index >= data.size()) throw DataError("--index out of dataset range");
            ModelPairOracle oracle = ModelPairOracle::from_models(original, compressed);
            OperatorPool pool = make_default_pool();
            fuzz_search.mode = search_mode_from_name(fuzz_mode);
            fuzz_genetic.rng_seed = fuzz_search.rng_seed;
            fuzz_genetic.max_queries = fuzz_search.max_queries;
            fuzz_genetic.timeout_s = fuzz_search.timeout_s;
            const TrialReport r =
                engine_kind_from_name(fuzz_engine) == EngineKind::trigger
                    ? run_trigger_search(oracle, data.images[fuzz_index], pool, fuzz_search)
                    : run_genetic_search(oracle, data.images[fuzz_index], pool, fuzz_genetic);
            print_trial_report(r);
            if (r.success && !fuzz_save_trigger.empty()) {
                save_trigger_raw(*r.trigger, fuzz_save_trigger);
                std::printf("trigger written to %s\n", fuzz_save_trigger.c_str());
            }
            return kExitOk;
        }
        if (bench_cmd->parsed()) {
            ExperimentSpec spec = load_experiment_spec(bench_config);
            if (!bench_engine.empty()) spec.engine = engine_kind_from_name(bench_engine);
            if (!bench_mode.empty()) spec.search.mode = search_mode_from_name(bench_mode);
            if (bench_seed_set) spec.seed = bench_seed;
            if (bench_reps != 0) spec.repetitions = bench_reps;
            if (bench_per_class != 0) spec.seeds_per_class = bench_per_class;
            if (bench_threads_set) spec.threads = bench_threads;
            if (!bench_out_dir.empty()) spec.out_dir = bench_out_dir;
            const BenchReport report = run_experiment(spec);
            std::fputs(summary_to_text(report).c_str(), stdout);
            if (!spec.out_dir.empty())
                std::printf("report files in %s\n", spec.out_dir.c_str());
            return kExitOk;
        }
        if (report_cmd->parsed()) {
            const std::vector<TrialRow> rows = load_csv_rows(report_csv);
            const Aggregates a = compute_aggregates(rows);
            std::printf("trials: %zu\n", a.trials);
            std::printf("successes: %zu\n", a.successes);
            std::printf("success_rate: %.6f\n", a.success_rate);
            if (a.successes > 0) {
                std::printf("queries: mean %.3f, median %.3f\n", a.mean_queries, a.median_queries);
                std::printf("time_ms: mean %.3f, median %.3f\n", a.mean_time_ms, a.median_time_ms);
            } else {
                std::printf("queries: no successes\n");
            }
            return kExitOk;
        }
        if (hist_cmd->parsed()) {
            const std::vector<TrialRow> rows = load_csv_rows(hist_csv);
            const std::string table = histogram_to_text(compute_query_histogram(rows));
            if (hist_out.empty()) {
                std::fputs(table.c_str(), stdout);
            } else {
                std::ofstream f(hist_out, std::ios::binary);
                if (!f) throw ParseError("cannot open for write: " + hist_out);
                f << table;
            }
            return kExitOk;
        }
    } catch (const ContractViolation& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    } catch (const DataError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    } catch (const UnsupportedError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "experiment failed: %s\n", e.what());
        return kExitExperiment;
    }
    return kExitUsage;
}

} // namespace

int main(int argc, char** argv) { return run(argc, argv); }
