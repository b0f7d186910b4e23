#pragma once

#include "espice/kv_config.hpp"
#include "espice/runtime.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace espice {

// Fully resolved experiment description (types interned, pattern and window
// bound to ids). Built from the flat key/value config format.
struct ExperimentConfig {
    TypeRegistry registry;

    bool synth = true;
    SynthConfig synth_cfg;
    std::size_t synth_count = 0;
    std::string replay_path;
    double training_rate = 1000.0; // arrival rate before overload injection

    WindowSpec window;
    Pattern pattern;
    std::string shedder = "espice";

    UtilityModel::Params model;
    OverloadDetector::Params detector;
    bool f_auto = false;

    RuntimeConfig runtime;

    std::uint32_t repetitions = 1;
    std::uint64_t seed = 1;
    std::string out_dir; // empty = no files written

    static ExperimentConfig from_kv(const KvConfig& kv);
    static ExperimentConfig from_file(const std::string& path);

    std::uint32_t type_count() const { return static_cast<std::uint32_t>(registry.count()); }
};

struct QualityReport {
    std::uint64_t n_fp = 0;
    std::uint64_t n_fn = 0;
    std::uint64_t oracle_count = 0;
    std::uint64_t shed_count = 0;
    double fp_pct = 0.0;
    double fn_pct = 0.0;
    double latency_p50_ms = 0.0;
    double latency_p95_ms = 0.0;
    double latency_p99_ms = 0.0;
    double latency_max_ms = 0.0;
    std::uint64_t drops = 0;
    double mean_shed_decision_ns = 0.0;
};

// N_fn = |oracle \ shed|, N_fp = |shed \ oracle| with matches keyed by
// (window, sorted contributor list); percentages relative to the oracle count.
QualityReport quality(const std::vector<ComplexEvent>& oracle,
                      const std::vector<ComplexEvent>& shed);

struct ExperimentResult {
    RunTrace oracle;
    std::vector<RunTrace> rep_traces;
    std::vector<QualityReport> reps;
    double fn_pct_mean = 0.0, fn_pct_sd = 0.0;
    double fp_pct_mean = 0.0, fp_pct_sd = 0.0;
};

// Runs the oracle once and `repetitions` shed runs with derived seeds;
// aggregates quality and writes the CSV reports when out_dir is set.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

struct SweepRow {
    double value = 0.0;
    double fn_pct_mean = 0.0, fn_pct_sd = 0.0;
    double fp_pct_mean = 0.0, fp_pct_sd = 0.0;
    double latency_max_ms = 0.0;
};

// axis: pattern_size | window_size | bin_size | rate. One run_experiment per
// value; writes sweep.csv under cfg.out_dir when set.
std::vector<SweepRow> sweep(const ExperimentConfig& cfg, const std::string& axis,
                            const std::vector<double>& values);

ExperimentConfig apply_axis(const ExperimentConfig& cfg, const std::string& axis, double value);

// Mean per-decision cost of the O(1) drop check for different table widths.
struct ShedBenchRow {
    std::uint32_t ref_size = 0;
    double ns_per_decision = 0.0;
};
std::vector<ShedBenchRow> bench_shedder(const std::vector<std::uint32_t>& ref_sizes,
                                        std::uint32_t type_count, std::uint64_t iterations,
                                        std::uint64_t seed);

} // namespace espice
