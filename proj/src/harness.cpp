#include "espice/harness.hpp"

#include "espice/errors.hpp"
#include "espice/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace espice {

namespace {

std::pair<std::string, std::string> split_once(const std::string& s, char sep,
                                               const std::string& what) {
    auto p = s.find(sep);
    if (p == std::string::npos) throw ConfigError("expected `" + what + "`, got: " + s);
    return {trim(s.substr(0, p)), trim(s.substr(p + 1))};
}

double to_num(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') throw ConfigError("not a number: " + s);
    return v;
}

std::uint64_t to_u64(const std::string& s) {
    const double v = to_num(s);
    if (v < 0) throw ConfigError("expected a non-negative integer: " + s);
    return static_cast<std::uint64_t>(v);
}

} // namespace

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    return from_kv(KvConfig::from_file(path));
}

ExperimentConfig ExperimentConfig::from_kv(const KvConfig& kv) {
    ExperimentConfig cfg;

    for (const auto& name : kv.get_list("types")) cfg.registry.intern(name);
    if (cfg.registry.count() == 0) throw ConfigError("config: `types` must list event types");
    auto type_of = [&](const std::string& name) {
        TypeId t = cfg.registry.find(name);
        if (t >= cfg.registry.count()) throw ConfigError("config: unknown type name: " + name);
        return t;
    };

    const std::string workload = kv.get_string("workload", "synth");
    if (workload == "synth") {
        cfg.synth = true;
        cfg.synth_cfg.type_count = cfg.type_count();
        cfg.synth_cfg.base_rate = kv.get_double("synth.base_rate", 1000.0);
        cfg.synth_cfg.seed = static_cast<std::uint64_t>(kv.get_int("seed", 1));
        cfg.synth_count = static_cast<std::size_t>(kv.get_int("synth.count"));
        if (kv.has("synth.noise")) {
            cfg.synth_cfg.noise_mix.assign(cfg.type_count(), 0.0);
            for (const auto& tok : kv.get_list("synth.noise")) {
                auto [name, w] = split_once(tok, ':', "type:weight");
                cfg.synth_cfg.noise_mix[type_of(name)] = to_num(w);
            }
        }
        for (const auto& key : kv.keys_with_prefix("synth.rule.")) {
            auto parts = kv.get_list(key);
            if (parts.size() != 5)
                throw ConfigError("config: " + key + " wants trigger,correlated,min,max,prob");
            CorrelationRule r;
            r.trigger = type_of(parts[0]);
            r.correlated = type_of(parts[1]);
            r.offset_min = static_cast<std::uint32_t>(to_u64(parts[2]));
            r.offset_max = static_cast<std::uint32_t>(to_u64(parts[3]));
            r.prob = to_num(parts[4]);
            cfg.synth_cfg.rules.push_back(r);
        }
        cfg.synth_cfg.validate();
    } else if (workload == "replay") {
        cfg.synth = false;
        cfg.replay_path = kv.get_string("replay.path");
    } else {
        throw ConfigError("config: workload must be synth or replay");
    }

    {
        auto [kind, arg] = split_once(kv.get_string("window.open"), ':', "kind:arg");
        if (kind == "slide") {
            cfg.window.open_rule = WindowSpec::Open::EveryKEvents;
            cfg.window.slide = to_u64(arg);
        } else if (kind == "types") {
            cfg.window.open_rule = WindowSpec::Open::TypeSet;
            for (const auto& n : split_csv(arg)) cfg.window.open_types.push_back(type_of(n));
        } else {
            throw ConfigError("config: window.open must be slide:<k> or types:<names>");
        }
    }
    {
        auto [kind, arg] = split_once(kv.get_string("window.close"), ':', "kind:arg");
        if (kind == "count")
            cfg.window.close_rule = WindowSpec::Close::Count;
        else if (kind == "time")
            cfg.window.close_rule = WindowSpec::Close::TimeMs;
        else
            throw ConfigError("config: window.close must be count:<n> or time:<ms>");
        cfg.window.ws = to_u64(arg);
    }
    cfg.window.max_open = static_cast<std::size_t>(kv.get_int("window.max_open", 10'000));
    if (kv.has("window.train_size_cycle"))
        cfg.runtime.train_size_cycle = kv.get_double_list("window.train_size_cycle");
    cfg.runtime.shed_size_multiplier = kv.get_double("window.shed_size_multiplier", 1.0);

    {
        const std::string kind = kv.get_string("pattern.kind");
        if (kind == "seq") {
            cfg.pattern.kind = Pattern::Kind::Sequence;
            for (const auto& n : kv.get_list("pattern.steps")) cfg.pattern.steps.push_back(type_of(n));
        } else if (kind == "seq_any") {
            cfg.pattern.kind = Pattern::Kind::SequenceAny;
            cfg.pattern.head = type_of(kv.get_string("pattern.head"));
            cfg.pattern.any_n = static_cast<std::uint32_t>(kv.get_int("pattern.any_n"));
            for (const auto& n : kv.get_list("pattern.candidates"))
                cfg.pattern.candidates.push_back(type_of(n));
        } else {
            throw ConfigError("config: pattern.kind must be seq or seq_any");
        }
        const std::string sel = kv.get_string("pattern.selection", "first");
        if (sel == "first")
            cfg.pattern.selection = Pattern::Selection::First;
        else if (sel == "last")
            cfg.pattern.selection = Pattern::Selection::Last;
        else
            throw ConfigError("config: pattern.selection must be first or last");
        const std::string con = kv.get_string("pattern.consumption", "consumed");
        if (con == "consumed")
            cfg.pattern.consumption = Pattern::Consumption::Consumed;
        else if (con == "zero")
            cfg.pattern.consumption = Pattern::Consumption::Zero;
        else
            throw ConfigError("config: pattern.consumption must be consumed or zero");
        cfg.pattern.one_match_per_window = kv.get_bool("pattern.one_match_per_window", true);
        cfg.pattern.validate();
    }

    cfg.shedder = kv.get_string("shedder", "espice");

    {
        const std::string n = kv.get_string("model.N", "auto");
        cfg.model.ref_size = n == "auto" ? 0 : static_cast<std::uint32_t>(to_u64(n));
        cfg.model.bin_size = static_cast<std::uint32_t>(kv.get_int("model.bs", 1));
        cfg.model.retrain_interval =
            static_cast<std::uint32_t>(kv.get_int("model.retrain_interval", 0));
        cfg.model.retrain_decay = kv.get_double("model.retrain_decay", 0.0);
        cfg.model.unknown_type_utility =
            static_cast<int>(kv.get_int("model.unknown_type_utility", 0));
    }

    cfg.detector.latency_bound_s = kv.get_double("latency_bound_ms", 1000.0) / 1000.0;
    const std::string f = kv.get_string("f", "0.8");
    if (f == "auto") {
        cfg.f_auto = true;
        cfg.detector.f = 0.8;
    } else {
        cfg.detector.f = to_num(f);
    }
    cfg.detector.period_events =
        static_cast<std::uint32_t>(kv.get_int("detector_period_events", 100));
    cfg.detector.stop_hysteresis = kv.get_double("stop_hysteresis", 0.9);

    cfg.runtime.core_membership_rate = kv.get_double("core_membership_rate", 10'000.0);
    cfg.runtime.duration_s = kv.get_double("duration_s", 60.0);
    cfg.runtime.training_fraction = kv.get_double("training_fraction", 0.2);
    cfg.runtime.overload_factor = kv.get_double("overload_factor", 0.0);
    cfg.runtime.f_auto = cfg.f_auto;
    cfg.training_rate = kv.get_double("training_rate", cfg.synth ? cfg.synth_cfg.base_rate : 1000.0);
    for (const auto& key : kv.keys_with_prefix("rate.step.")) {
        auto parts = kv.get_list(key);
        if (parts.size() != 2) throw ConfigError("config: " + key + " wants at_s,factor");
        cfg.runtime.rate_steps.emplace_back(to_num(parts[0]), to_num(parts[1]));
    }

    cfg.repetitions = static_cast<std::uint32_t>(kv.get_int("repetitions", 1));
    if (cfg.repetitions < 1) throw ConfigError("config: repetitions must be >= 1");
    cfg.seed = static_cast<std::uint64_t>(kv.get_int("seed", 1));
    cfg.out_dir = kv.get_string("out_dir", "");
    return cfg;
}

namespace {

using MatchKey = std::pair<WindowId, std::vector<Contributor>>;

std::map<MatchKey, std::uint64_t> key_multiset(const std::vector<ComplexEvent>& ces) {
    std::map<MatchKey, std::uint64_t> m;
    for (const auto& ce : ces) {
        auto sorted = ce.contributors;
        std::sort(sorted.begin(), sorted.end());
        ++m[{ce.detection_window, std::move(sorted)}];
    }
    return m;
}

} // namespace

QualityReport quality(const std::vector<ComplexEvent>& oracle,
                      const std::vector<ComplexEvent>& shed) {
    QualityReport q;
    q.oracle_count = oracle.size();
    q.shed_count = shed.size();

    const auto om = key_multiset(oracle);
    const auto sm = key_multiset(shed);
    for (const auto& [key, n] : om) {
        auto it = sm.find(key);
        const std::uint64_t have = it == sm.end() ? 0 : it->second;
        if (n > have) q.n_fn += n - have;
    }
    for (const auto& [key, n] : sm) {
        auto it = om.find(key);
        const std::uint64_t have = it == om.end() ? 0 : it->second;
        if (n > have) q.n_fp += n - have;
    }
    if (q.oracle_count > 0) {
        q.fn_pct = 100.0 * static_cast<double>(q.n_fn) / static_cast<double>(q.oracle_count);
        q.fp_pct = 100.0 * static_cast<double>(q.n_fp) / static_cast<double>(q.oracle_count);
    }
    return q;
}

namespace {

std::unique_ptr<PacedSource> make_source(const ExperimentConfig& cfg, TypeRegistry& registry,
                                         const std::vector<std::pair<double, double>>& abs_steps) {
    std::unique_ptr<StreamSource> inner;
    if (cfg.synth) {
        inner = std::make_unique<SyntheticSource>(cfg.synth_cfg, cfg.synth_count);
    } else {
        inner = std::make_unique<FileReplaySource>(cfg.replay_path, registry);
    }
    RateSchedule sched(cfg.training_rate);
    for (const auto& [at_s, rate] : abs_steps) sched.add_step(at_s, rate);
    return std::make_unique<PacedSource>(std::move(inner), sched);
}

QualityReport report_for(const RunTrace& oracle, const RunTrace& shed) {
    QualityReport q = quality(oracle.complex_events, shed.complex_events);
    q.latency_p50_ms = shed.latency_percentile_ms(50.0);
    q.latency_p95_ms = shed.latency_percentile_ms(95.0);
    q.latency_p99_ms = shed.latency_percentile_ms(99.0);
    q.latency_max_ms = shed.max_latency_ms();
    q.drops = shed.memberships_dropped;
    q.mean_shed_decision_ns = shed.mean_shed_decision_ns;
    return q;
}

void write_report_csv(const std::string& dir, const ExperimentResult& res) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::ofstream out(dir + "/report.csv");
    // wall-clock shed-decision time stays out of the file so identical
    // configs produce byte-identical reports
    out << "rep,n_fn,n_fp,fn_pct,fp_pct,oracle_count,shed_count,drops,lat_p50_ms,lat_p95_ms,"
           "lat_p99_ms,lat_max_ms\n";
    char buf[512];
    for (std::size_t i = 0; i < res.reps.size(); ++i) {
        const auto& q = res.reps[i];
        std::snprintf(buf, sizeof buf,
                      "%zu,%llu,%llu,%.6f,%.6f,%llu,%llu,%llu,%.6f,%.6f,%.6f,%.6f\n", i,
                      static_cast<unsigned long long>(q.n_fn),
                      static_cast<unsigned long long>(q.n_fp), q.fn_pct, q.fp_pct,
                      static_cast<unsigned long long>(q.oracle_count),
                      static_cast<unsigned long long>(q.shed_count),
                      static_cast<unsigned long long>(q.drops), q.latency_p50_ms, q.latency_p95_ms,
                      q.latency_p99_ms, q.latency_max_ms);
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "mean,,,%.6f,%.6f,,,,,,,\n", res.fn_pct_mean, res.fp_pct_mean);
    out << buf;
    std::snprintf(buf, sizeof buf, "sd,,,%.6f,%.6f,,,,,,,\n", res.fn_pct_sd, res.fp_pct_sd);
    out << buf;
}

std::pair<double, double> mean_sd(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size());
    return {mean, std::sqrt(var)};
}

} // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    ExperimentResult res;
    res.rep_traces.resize(cfg.repetitions);

    auto run_rep = [&](std::uint32_t rep) {
        TypeRegistry reg = cfg.registry; // replay interning is per-run
        auto src = make_source(cfg, reg, {});
        OperatorRuntime rt(cfg.window, cfg.pattern, cfg.model, cfg.detector, cfg.runtime,
                           cfg.type_count(), cfg.shedder, derive_seed(cfg.seed, rep));
        return rt.run(*src);
    };

    // First repetition profiles th; the oracle replays the identical arrival
    // schedule so both runs see the same event set.
    res.rep_traces[0] = run_rep(0);

    std::vector<std::pair<double, double>> abs_steps;
    const RunTrace& t0 = res.rep_traces[0];
    if (t0.profiled_th > 0.0) {
        if (cfg.runtime.overload_factor > 0.0)
            abs_steps.emplace_back(t0.train_end_s, cfg.runtime.overload_factor * t0.profiled_th);
        for (const auto& [at_s, factor] : cfg.runtime.rate_steps)
            abs_steps.emplace_back(at_s, factor * t0.profiled_th);
    }
    {
        TypeRegistry reg = cfg.registry;
        auto src = make_source(cfg, reg, abs_steps);
        res.oracle = oracle_run(cfg.window, cfg.pattern, cfg.type_count(), *src, cfg.runtime);
    }

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (int rep = 1; rep < static_cast<int>(cfg.repetitions); ++rep)
        res.rep_traces[static_cast<std::size_t>(rep)] = run_rep(static_cast<std::uint32_t>(rep));

    std::vector<double> fns, fps;
    for (const auto& trace : res.rep_traces) {
        res.reps.push_back(report_for(res.oracle, trace));
        fns.push_back(res.reps.back().fn_pct);
        fps.push_back(res.reps.back().fp_pct);
    }
    std::tie(res.fn_pct_mean, res.fn_pct_sd) = mean_sd(fns);
    std::tie(res.fp_pct_mean, res.fp_pct_sd) = mean_sd(fps);

    if (!cfg.out_dir.empty()) {
        res.oracle.write_csv(cfg.out_dir + "/oracle");
        for (std::size_t i = 0; i < res.rep_traces.size(); ++i)
            res.rep_traces[i].write_csv(cfg.out_dir + "/rep" + std::to_string(i));
        write_report_csv(cfg.out_dir, res);
    }
    return res;
}

ExperimentConfig apply_axis(const ExperimentConfig& cfg, const std::string& axis, double value) {
    ExperimentConfig out = cfg;
    if (axis == "pattern_size") {
        const auto n = static_cast<std::uint32_t>(value);
        if (out.pattern.kind == Pattern::Kind::SequenceAny) {
            out.pattern.any_n = n;
        } else {
            if (n < 2 || n > out.pattern.steps.size())
                throw UsageError("sweep: pattern_size " + std::to_string(n) +
                                 " not applicable to this sequence");
            out.pattern.steps.resize(n);
        }
    } else if (axis == "window_size") {
        out.window.ws = static_cast<std::uint64_t>(value);
    } else if (axis == "bin_size") {
        out.model.bin_size = static_cast<std::uint32_t>(value);
    } else if (axis == "rate") {
        out.runtime.overload_factor = value;
    } else {
        throw UsageError("sweep: unknown axis " + axis +
                         " (want pattern_size|window_size|bin_size|rate)");
    }
    return out;
}

std::vector<SweepRow> sweep(const ExperimentConfig& cfg, const std::string& axis,
                            const std::vector<double>& values) {
    if (values.empty()) throw UsageError("sweep: no values given");
    std::vector<SweepRow> rows;
    for (double v : values) {
        ExperimentConfig sub = apply_axis(cfg, axis, v);
        if (!cfg.out_dir.empty()) {
            char label[64];
            std::snprintf(label, sizeof label, "%s_%g", axis.c_str(), v);
            sub.out_dir = cfg.out_dir + "/sweep_" + label;
        }
        ExperimentResult r = run_experiment(sub);
        double lat_max = 0.0;
        for (const auto& q : r.reps) lat_max = std::max(lat_max, q.latency_max_ms);
        rows.push_back({v, r.fn_pct_mean, r.fn_pct_sd, r.fp_pct_mean, r.fp_pct_sd, lat_max});
    }
    if (!cfg.out_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(cfg.out_dir);
        std::ofstream out(cfg.out_dir + "/sweep.csv");
        out << "value,fn_pct_mean,fn_pct_sd,fp_pct_mean,fp_pct_sd,lat_max_ms\n";
        char buf[256];
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof buf, "%g,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.value, r.fn_pct_mean,
                          r.fn_pct_sd, r.fp_pct_mean, r.fp_pct_sd, r.latency_max_ms);
            out << buf;
        }
    }
    return rows;
}

std::vector<ShedBenchRow> bench_shedder(const std::vector<std::uint32_t>& ref_sizes,
                                        std::uint32_t type_count, std::uint64_t iterations,
                                        std::uint64_t seed) {
    std::vector<ShedBenchRow> rows;
    for (std::uint32_t n : ref_sizes) {
        ModelSnapshot snap;
        snap.ut = UtilityTable::zeros(type_count, n, 1);
        Rng rng(derive_seed(seed, n));
        for (auto& c : snap.ut.cells) c = static_cast<std::uint8_t>(rng() % 101);
        snap.shares.type_count = type_count;
        snap.shares.ref_size = n;
        snap.shares.bin_size = 1;
        snap.shares.columns = n;
        snap.shares.shares.assign(static_cast<std::size_t>(type_count) * n,
                                  1.0 / static_cast<double>(type_count));
        const std::uint32_t rho = 4;
        snap.cdts = compute_cdt(snap.ut, snap.shares, rho);
        snap.partitions = ColumnPartitions{snap.ut.columns, rho};

        ShedPlan plan = thresholds_for(std::max(1u, n / rho / 10), &snap);

        // Pre-drawn lookup coordinates so the loop times the decision alone.
        constexpr std::size_t kProbe = 1 << 14;
        std::vector<TypeId> ts(kProbe);
        std::vector<std::uint32_t> ps(kProbe);
        for (std::size_t i = 0; i < kProbe; ++i) {
            ts[i] = static_cast<TypeId>(rng() % type_count);
            ps[i] = static_cast<std::uint32_t>(rng() % n) + 1;
        }

        volatile std::uint64_t sink = 0;
        std::uint64_t hits = 0;
        const auto t0 = std::chrono::steady_clock::now();
        for (std::uint64_t i = 0; i < iterations; ++i) {
            const std::size_t j = i & (kProbe - 1);
            hits += apply_ls(ts[j], ps[j], n, plan) ? 1 : 0;
        }
        const auto t1 = std::chrono::steady_clock::now();
        sink = hits;
        (void)sink;

        const double ns =
            static_cast<double>(
                std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count()) /
            static_cast<double>(iterations);
        rows.push_back({n, ns});
    }
    return rows;
}

} // namespace espice
