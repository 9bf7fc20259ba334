#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "devifuzz/dataset.hpp"
#include "devifuzz/genetic.hpp"
#include "devifuzz/model.hpp"
#include "devifuzz/search.hpp"

namespace devifuzz {

enum class EngineKind { trigger, genetic };

const char* engine_kind_name(EngineKind e);
EngineKind engine_kind_from_name(const std::string& name);

/// Where the benchmark's images come from: IDX files or the in-tree
/// synthetic generator (its test split supplies the seeds).
struct DatasetSource {
    std::optional<SyntheticSpec> synthetic;
    std::string images_path;
    std::string labels_path;
};

struct ExperimentSpec {
    std::string name = "experiment";
    std::string original_model;
    std::string compressed_model;
    DatasetSource dataset;
    std::size_t seeds_per_class = 50;
    std::size_t repetitions = 5;
    EngineKind engine = EngineKind::trigger;
    SearchConfig search;
    GeneticConfig genetic;
    OperatorParams operators;
    std::uint64_t seed = 1;
    std::size_t threads = 0;           // 0 = hardware concurrency
    bool record_wall_time = true;      // false writes time_ms as 0 for diffable reports
    bool share_store_across_seeds = false; // forces single-threaded execution
    std::string out_dir;               // empty = do not write files
};

ExperimentSpec experiment_spec_from_json(const std::string& json_text);
ExperimentSpec load_experiment_spec(const std::string& path);

struct SeedSet {
    std::vector<Tensor> images;
    std::vector<std::size_t> labels;
    std::vector<std::size_t> dataset_indices;

    std::size_t size() const { return images.size(); }
};

/// Draws `per_class` inputs per class, uniformly at random under `rng_seed`,
/// keeping only inputs on which the two models agree on the top-1 label.
/// Throws DataError naming the class when a class runs out of candidates.
SeedSet select_seeds(const LabeledDataset& data, const ModelGraph& original,
                     const ModelGraph& compressed, std::size_t per_class,
                     std::uint64_t rng_seed);

/// One row of the flat report table.
struct TrialRow {
    std::size_t seed_id = 0;
    std::size_t repetition = 0;
    std::string engine;
    bool success = false;
    std::uint64_t queries = 0;
    double time_ms = 0.0;
    std::uint64_t iterations = 0;
};

struct TrialRecord {
    TrialRow row;
    TrialReport report;
};

struct Aggregates {
    std::size_t trials = 0;
    std::size_t successes = 0;
    double success_rate = 0.0;
    // Over successful trials only; meaningless when successes == 0.
    double mean_queries = 0.0;
    double median_queries = 0.0;
    double mean_time_ms = 0.0;
    double median_time_ms = 0.0;
};

Aggregates compute_aggregates(const std::vector<TrialRow>& rows);

struct Histogram {
    struct Bucket {
        std::uint64_t lo = 0; // inclusive
        std::uint64_t hi = 0; // inclusive
        std::size_t count = 0;
    };
    std::vector<Bucket> buckets;
    double mean = 0.0;
    double median = 0.0;
    std::size_t successes = 0;
};

/// Fixed-width buckets over the successful trials' query counts.
Histogram compute_query_histogram(const std::vector<TrialRow>& rows);
std::string histogram_to_text(const Histogram& h);

struct BenchReport {
    ExperimentSpec spec;
    std::vector<TrialRecord> trials; // ordered by (seed_id, repetition)
    Aggregates aggregates;
};

std::string report_to_csv(const BenchReport& report);
std::vector<TrialRow> parse_csv_rows(const std::string& csv_text);
std::vector<TrialRow> load_csv_rows(const std::string& path);
std::string summary_to_text(const BenchReport& report);

/// Full protocol run: load/build the model pair and dataset, select seeds,
/// run `repetitions` trials per seed on a worker pool with per-trial rng
/// derived from (experiment seed, seed_id, repetition), aggregate, and (when
/// out_dir is set) write report.csv, summary.txt and histogram.txt.
/// A trial that throws is recorded as a failed trial with a diagnostic.
BenchReport run_experiment(const ExperimentSpec& spec);

} // namespace devifuzz
