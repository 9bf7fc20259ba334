#include "devifuzz/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "devifuzz/errors.hpp"
#include "devifuzz/inference.hpp"
#include "devifuzz/model_io.hpp"

namespace devifuzz {

using nlohmann::json;

const char* engine_kind_name(EngineKind e) {
    return e == EngineKind::trigger ? "trigger" : "genetic";
}

EngineKind engine_kind_from_name(const std::string& name) {
    if (name == "trigger") return EngineKind::trigger;
    if (name == "genetic") return EngineKind::genetic;
    throw DataError("unknown engine: " + name);
}

// ─── Experiment spec loading ────────────────────────────────────────────

namespace {

template <typename T>
void read_field(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

NnIndexKind index_kind_from_name(const std::string& name) {
    if (name == "linear_scan") return NnIndexKind::linear_scan;
    if (name == "kd_tree") return NnIndexKind::kd_tree;
    throw DataError("unknown nn index kind: " + name);
}

} // namespace

ExperimentSpec experiment_spec_from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("experiment config: ") + e.what());
    }

    ExperimentSpec spec;
    read_field(j, "name", spec.name);
    read_field(j, "original", spec.original_model);
    read_field(j, "compressed", spec.compressed_model);
    read_field(j, "seeds_per_class", spec.seeds_per_class);
    read_field(j, "repetitions", spec.repetitions);
    read_field(j, "seed", spec.seed);
    read_field(j, "threads", spec.threads);
    read_field(j, "record_wall_time", spec.record_wall_time);
    read_field(j, "share_store_across_seeds", spec.share_store_across_seeds);
    read_field(j, "out_dir", spec.out_dir);

    if (j.contains("engine")) spec.engine = engine_kind_from_name(j.at("engine").get<std::string>());

    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        if (d.contains("synthetic")) {
            const json& s = d.at("synthetic");
            SyntheticSpec syn;
            read_field(s, "classes", syn.classes);
            read_field(s, "train_per_class", syn.train_per_class);
            read_field(s, "test_per_class", syn.test_per_class);
            read_field(s, "shape", syn.image_shape);
            read_field(s, "noise_sigma", syn.noise_sigma);
            read_field(s, "seed", syn.seed);
            spec.dataset.synthetic = syn;
        }
        read_field(d, "images", spec.dataset.images_path);
        read_field(d, "labels", spec.dataset.labels_path);
    }

    if (j.contains("search")) {
        const json& s = j.at("search");
        read_field(s, "delta", spec.search.delta);
        read_field(s, "epsilon_nn", spec.search.epsilon_nn);
        read_field(s, "timeout_s", spec.search.timeout_s);
        read_field(s, "max_queries", spec.search.max_queries);
        if (s.contains("mode"))
            spec.search.mode = search_mode_from_name(s.at("mode").get<std::string>());
        if (s.contains("index"))
            spec.search.index = index_kind_from_name(s.at("index").get<std::string>());
        if (s.contains("linf_budget")) spec.search.linf_budget = s.at("linf_budget").get<double>();
    }

    if (j.contains("genetic")) {
        const json& g = j.at("genetic");
        read_field(g, "population", spec.genetic.population);
        read_field(g, "k", spec.genetic.k);
        read_field(g, "crossover_rate", spec.genetic.crossover_rate);
        read_field(g, "mutation_rate", spec.genetic.mutation_rate);
        read_field(g, "timeout_s", spec.genetic.timeout_s);
        read_field(g, "max_queries", spec.genetic.max_queries);
        if (g.contains("linf_budget")) spec.genetic.linf_budget = g.at("linf_budget").get<double>();
    }

    if (j.contains("operators")) {
        const json& o = j.at("operators");
        read_field(o, "perturb_pixels", spec.operators.perturb_pixels);
        read_field(o, "perturb_amplitude", spec.operators.perturb_amplitude);
        read_field(o, "noise_sigma", spec.operators.noise_sigma);
        read_field(o, "brightness_delta", spec.operators.brightness_delta);
        read_field(o, "contrast_strength", spec.operators.contrast_strength);
    }
    return spec;
}

ExperimentSpec load_experiment_spec(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open: " + path);
    std::stringstream buf;
    buf << f.rdbuf();
    return experiment_spec_from_json(buf.str());
}

// ─── Seed selection ─────────────────────────────────────────────────────

SeedSet select_seeds(const LabeledDataset& data, const ModelGraph& original,
                     const ModelGraph& compressed, std::size_t per_class,
                     std::uint64_t rng_seed) {
    data.validate();
    SeedSet out;
    for (std::size_t c = 0; c < data.num_classes; ++c) {
        std::vector<std::size_t> candidates;
        for (std::size_t i = 0; i < data.size(); ++i)
            if (data.labels[i] == c) candidates.push_back(i);

        Rng rng(derive_seed(rng_seed, 0x5EED, c));
        for (std::size_t i = candidates.size(); i > 1; --i)
            std::swap(candidates[i - 1], candidates[rng.uniform_index(i)]);

        std::size_t taken = 0;
        for (std::size_t idx : candidates) {
            if (taken == per_class) break;
            const Tensor& x = data.images[idx];
            if (top1(predict(original, x)).label != top1(predict(compressed, x)).label)
                continue; // triggering input, not a valid seed
            out.images.push_back(x);
            out.labels.push_back(c);
            out.dataset_indices.push_back(idx);
            ++taken;
        }
        if (taken < per_class)
            throw DataError("insufficient non-triggering inputs in class " + std::to_string(c) +
                            ": found " + std::to_string(taken) + ", need " +
                            std::to_string(per_class));
    }
    return out;
}

// ─── Aggregation ────────────────────────────────────────────────────────

namespace {

double mean_of(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

Aggregates compute_aggregates(const std::vector<TrialRow>& rows) {
    Aggregates agg;
    agg.trials = rows.size();
    std::vector<double> queries;
    std::vector<double> times;
    for (const TrialRow& r : rows) {
        if (!r.success) continue;
        ++agg.successes;
        queries.push_back(static_cast<double>(r.queries));
        times.push_back(r.time_ms);
    }
    agg.success_rate =
        agg.trials == 0 ? 0.0
                        : static_cast<double>(agg.successes) / static_cast<double>(agg.trials);
    if (agg.successes > 0) {
        agg.mean_queries = mean_of(queries);
        agg.median_queries = median_of(queries);
        agg.mean_time_ms = mean_of(times);
        agg.median_time_ms = median_of(times);
    }
    return agg;
}

Histogram compute_query_histogram(const std::vector<TrialRow>& rows) {
    Histogram h;
    std::vector<std::uint64_t> q;
    for (const TrialRow& r : rows)
        if (r.success) q.push_back(r.queries);
    h.successes = q.size();
    if (q.empty()) return h;

    std::sort(q.begin(), q.end());
    const std::uint64_t lo = q.front(), hi = q.back();
    const std::uint64_t span = hi - lo + 1;
    const std::uint64_t width = std::max<std::uint64_t>(1, (span + 19) / 20);
    const std::size_t nbuckets = static_cast<std::size_t>((span + width - 1) / width);
    h.buckets.resize(nbuckets);
    for (std::size_t b = 0; b < nbuckets; ++b) {
        h.buckets[b].lo = lo + b * width;
        h.buckets[b].hi = lo + (b + 1) * width - 1;
    }
    for (std::uint64_t v : q) ++h.buckets[static_cast<std::size_t>((v - lo) / width)].count;

    std::vector<double> qd(q.begin(), q.end());
    h.mean = mean_of(qd);
    h.median = median_of(qd);
    return h;
}

std::string histogram_to_text(const Histogram& h) {
    std::ostringstream os;
    os << "# query histogram (pooled over all repetitions, successful trials only)\n";
    if (h.successes == 0) {
        os << "# no successes\n";
        return os.str();
    }
    char line[128];
    std::snprintf(line, sizeof(line), "# successes %zu, mean %.3f, median %.3f\n", h.successes,
                  h.mean, h.median);
    os << line;
    os << "bucket_lo,bucket_hi,count\n";
    for (const Histogram::Bucket& b : h.buckets) {
        os << b.lo << ',' << b.hi << ',' << b.count << "\n";
    }
    return os.str();
}

// ─── CSV ────────────────────────────────────────────────────────────────

std::string report_to_csv(const BenchReport& report) {
    std::ostringstream os;
    os << "seed_id,repetition,engine,success,queries,time_ms,iterations\n";
    char num[64];
    for (const TrialRecord& t : report.trials) {
        const TrialRow& r = t.row;
        std::snprintf(num, sizeof(num), "%.3f", r.time_ms);
        os << r.seed_id << ',' << r.repetition << ',' << r.engine << ',' << (r.success ? 1 : 0)
           << ',' << r.queries << ',' << num << ',' << r.iterations << "\n";
    }
    return os.str();
}

std::vector<TrialRow> parse_csv_rows(const std::string& csv_text) {
    std::istringstream is(csv_text);
    std::string line;
    if (!std::getline(is, line) ||
        line != "seed_id,repetition,engine,success,queries,time_ms,iterations")
        throw ParseError("report csv: unexpected header");

    std::vector<TrialRow> rows;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string field;
        TrialRow r;
        auto next = [&](const char* what) {
            if (!std::getline(ls, field, ','))
                throw ParseError(std::string("report csv: missing ") + what);
            return field;
        };
        try {
            r.seed_id = std::stoul(next("seed_id"));
            r.repetition = std::stoul(next("repetition"));
            r.engine = next("engine");
            r.success = std::stoi(next("success")) != 0;
            r.queries = std::stoull(next("queries"));
            r.time_ms = std::stod(next("time_ms"));
            r.iterations = std::stoull(next("iterations"));
        } catch (const std::logic_error&) {
            throw ParseError("report csv: malformed row at line " + std::to_string(line_no));
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<TrialRow> load_csv_rows(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open: " + path);
    std::stringstream buf;
    buf << f.rdbuf();
    return parse_csv_rows(buf.str());
}

std::string summary_to_text(const BenchReport& report) {
    const Aggregates& a = report.aggregates;
    std::ostringstream os;
    char line[256];
    os << "devifuzz benchmark summary\n";
    os << "name: " << report.spec.name << "\n";
    os << "engine: " << engine_kind_name(report.spec.engine);
    if (report.spec.engine == EngineKind::trigger)
        os << " (mode " << search_mode_name(report.spec.search.mode) << ")";
    os << "\n";
    os << "aggregation: pooled over all repetitions; query/time stats over successful trials\n";
    if (report.spec.repetitions > 0 && a.trials % report.spec.repetitions == 0) {
        std::snprintf(line, sizeof(line), "trials: %zu (%zu seeds x %zu repetitions)\n", a.trials,
                      a.trials / report.spec.repetitions, report.spec.repetitions);
    } else {
        std::snprintf(line, sizeof(line), "trials: %zu\n", a.trials);
    }
    os << line;
    std::snprintf(line, sizeof(line), "successes: %zu\n", a.successes);
    os << line;
    std::snprintf(line, sizeof(line), "success_rate: %.6f\n", a.success_rate);
    os << line;
    if (a.successes == 0) {
        os << "queries: no successes\n";
        os << "time_ms: no successes\n";
    } else {
        std::snprintf(line, sizeof(line), "queries: mean %.3f, median %.3f\n", a.mean_queries,
                      a.median_queries);
        os << line;
        if (report.spec.record_wall_time) {
            std::snprintf(line, sizeof(line), "time_ms: mean %.3f, median %.3f\n", a.mean_time_ms,
                          a.median_time_ms);
            os << line;
        } else {
            os << "time_ms: not recorded\n";
        }
    }
    return os.str();
}

// ─── Experiment driver ──────────────────────────────────────────────────

namespace {

LabeledDataset load_bench_dataset(const DatasetSource& src) {
    if (src.synthetic) {
        // Seeds always come from the held-out test split.
        return make_synthetic(*src.synthetic).test;
    }
    if (src.images_path.empty() || src.labels_path.empty())
        throw DataError("experiment dataset: need synthetic spec or images+labels paths");
    LabeledDataset data;
    data.images = load_idx_images(src.images_path);
    data.labels = load_idx_labels(src.labels_path);
    std::size_t max_label = 0;
    for (std::size_t l : data.labels) max_label = std::max(max_label, l);
    data.num_classes = max_label + 1;
    data.validate();
    return data;
}

TrialReport run_one_trial(const ExperimentSpec& spec, const ModelGraph& original,
                          const ModelGraph& compressed, const Tensor& seed_input,
                          std::uint64_t trial_seed, StateStore* shared_store) {
    ModelPairOracle oracle = ModelPairOracle::from_models(original, compressed);
    OperatorPool pool = make_default_pool(spec.operators);
    if (spec.engine == EngineKind::trigger) {
        SearchConfig cfg = spec.search;
        cfg.rng_seed = trial_seed;
        return run_trigger_search(oracle, seed_input, pool, cfg, shared_store);
    }
    GeneticConfig cfg = spec.genetic;
    cfg.rng_seed = trial_seed;
    return run_genetic_search(oracle, seed_input, pool, cfg);
}

} // namespace

BenchReport run_experiment(const ExperimentSpec& spec) {
    const ModelGraph original = load_model(spec.original_model);
    const ModelGraph compressed = load_model(spec.compressed_model);
    if (original.manifest.input_shape != compressed.manifest.input_shape)
        throw DataError("model pair: input shapes differ");

    const LabeledDataset data = load_bench_dataset(spec.dataset);
    const SeedSet seeds =
        select_seeds(data, original, compressed, spec.seeds_per_class, spec.seed);

    struct Job {
        std::size_t seed_id;
        std::size_t repetition;
    };
    std::vector<Job> jobs;
    for (std::size_t s = 0; s < seeds.size(); ++s)
        for (std::size_t r = 0; r < spec.repetitions; ++r) jobs.push_back({s, r});

    std::vector<TrialRecord> records(jobs.size());
    auto run_job = [&](std::size_t ji, StateStore* shared_store) {
        const Job& job = jobs[ji];
        TrialRecord& rec = records[ji];
        rec.row.seed_id = job.seed_id;
        rec.row.repetition = job.repetition;
        rec.row.engine = engine_kind_name(spec.engine);
        const std::uint64_t trial_seed = derive_seed(spec.seed, job.seed_id, job.repetition);
        try {
            rec.report = run_one_trial(spec, original, compressed, seeds.images[job.seed_id],
                                       trial_seed, shared_store);
        } catch (const std::exception& e) {
            rec.report = TrialReport{};
            rec.report.diagnostic = e.what();
        }
        rec.row.success = rec.report.success;
        rec.row.queries = rec.report.queries;
        rec.row.time_ms = spec.record_wall_time ? rec.report.wall_time_ms : 0.0;
        rec.row.iterations = rec.report.iterations;
    };

    if (spec.share_store_across_seeds) {
        // A shared novelty store makes trials order-dependent; run them in
        // report order on one thread.
        StateStore shared(spec.search.epsilon_nn, spec.search.index);
        for (std::size_t ji = 0; ji < jobs.size(); ++ji) run_job(ji, &shared);
    } else {
        std::size_t threads = spec.threads != 0
                                  ? spec.threads
                                  : std::max<unsigned>(1, std::thread::hardware_concurrency());
        threads = std::min(threads, jobs.size());
        if (threads <= 1) {
            for (std::size_t ji = 0; ji < jobs.size(); ++ji) run_job(ji, nullptr);
        } else {
            std::atomic<std::size_t> next{0};
            std::vector<std::thread> workers;
            workers.reserve(threads);
            for (std::size_t t = 0; t < threads; ++t) {
                workers.emplace_back([&] {
                    for (;;) {
                        const std::size_t ji = next.fetch_add(1);
                        if (ji >= jobs.size()) return;
                        run_job(ji, nullptr);
                    }
                });
            }
            for (std::thread& w : workers) w.join();
        }
    }

    BenchReport report;
    report.spec = spec;
    report.trials = std::move(records);
    std::vector<TrialRow> rows;
    rows.reserve(report.trials.size());
    for (const TrialRecord& t : report.trials) rows.push_back(t.row);
    report.aggregates = compute_aggregates(rows);

    if (!spec.out_dir.empty()) {
        std::filesystem::create_directories(spec.out_dir);
        const auto write = [&](const std::string& name, const std::string& content) {
            const std::string path = spec.out_dir + "/" + name;
            std::ofstream f(path, std::ios::binary);
            if (!f) throw ParseError("cannot open for write: " + path);
            f << content;
        };
        write("report.csv", report_to_csv(report));
        write("summary.txt", summary_to_text(report));
        write("histogram.txt", histogram_to_text(compute_query_histogram(rows)));
    }
    return report;
}

} // namespace devifuzz
