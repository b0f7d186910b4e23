#include "espice/errors.hpp"
#include "espice/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

namespace {

void print_result(const espice::ExperimentResult& res) {
    std::printf("oracle complex events: %zu\n", res.oracle.complex_events.size());
    for (std::size_t i = 0; i < res.reps.size(); ++i) {
        const auto& q = res.reps[i];
        std::printf("rep %zu: fn=%llu (%.3f%%) fp=%llu (%.3f%%) drops=%llu lat_max=%.1fms\n", i,
                    static_cast<unsigned long long>(q.n_fn), q.fn_pct,
                    static_cast<unsigned long long>(q.n_fp), q.fp_pct,
                    static_cast<unsigned long long>(q.drops), q.latency_max_ms);
    }
    std::printf("fn_pct %.3f +- %.3f | fp_pct %.3f +- %.3f\n", res.fn_pct_mean, res.fn_pct_sd,
                res.fp_pct_mean, res.fp_pct_sd);
}

int run_cmd(const std::string& config_path, const std::string& out_override) {
    espice::ExperimentConfig cfg = espice::ExperimentConfig::from_file(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    print_result(espice::run_experiment(cfg));
    return 0;
}

int sweep_cmd(const std::string& config_path, const std::string& axis,
              const std::vector<double>& values, const std::string& out_override) {
    espice::ExperimentConfig cfg = espice::ExperimentConfig::from_file(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    auto rows = espice::sweep(cfg, axis, values);
    std::printf("%s,fn_pct_mean,fn_pct_sd,fp_pct_mean,fp_pct_sd\n", axis.c_str());
    for (const auto& r : rows)
        std::printf("%g,%.3f,%.3f,%.3f,%.3f\n", r.value, r.fn_pct_mean, r.fn_pct_sd, r.fp_pct_mean,
                    r.fp_pct_sd);
    return 0;
}

int model_export_cmd(const std::string& path, const std::string& config_path) {
    espice::ExperimentConfig cfg = espice::ExperimentConfig::from_file(config_path);
    cfg.out_dir.clear();
    cfg.repetitions = 1;

    espice::TypeRegistry reg = cfg.registry;
    espice::RateSchedule sched(cfg.training_rate);
    std::unique_ptr<espice::StreamSource> inner;
    if (cfg.synth)
        inner = std::make_unique<espice::SyntheticSource>(cfg.synth_cfg, cfg.synth_count);
    else
        inner = std::make_unique<espice::FileReplaySource>(cfg.replay_path, reg);
    espice::PacedSource src(std::move(inner), sched);

    espice::OperatorRuntime rt(cfg.window, cfg.pattern, cfg.model, cfg.detector, cfg.runtime,
                               cfg.type_count(), cfg.shedder, cfg.seed);
    rt.run(src);
    const espice::ModelSnapshot* snap = rt.model().snapshot();
    if (snap == nullptr)
        throw espice::NotReadyError("model export: the run produced no published model "
                                    "(no contributor statistics during training)");
    snap->export_csv(path);
    std::printf("model written: %s (M=%u N=%u bs=%u rho=%u)\n", path.c_str(),
                snap->ut.type_count, snap->ut.ref_size, snap->ut.bin_size, snap->partitions.rho);
    return 0;
}

int model_import_cmd(const std::string& path) {
    espice::ModelSnapshot snap = espice::ModelSnapshot::import_csv(path);
    std::printf("model ok: M=%u N=%u bs=%u columns=%u rho=%u\n", snap.ut.type_count,
                snap.ut.ref_size, snap.ut.bin_size, snap.ut.columns, snap.partitions.rho);
    for (const auto& cdt : snap.cdts)
        std::printf("  partition %u: CDT(0)=%.6f CDT(100)=%.6f\n", cdt.partition_id,
                    cdt.values[0], cdt.values[100]);
    return 0;
}

int bench_cmd(const std::vector<std::uint32_t>& sizes, std::uint32_t types, std::uint64_t iters,
              std::uint64_t seed) {
    auto rows = espice::bench_shedder(sizes, types, iters, seed);
    std::printf("N,ns_per_decision\n");
    for (const auto& r : rows) std::printf("%u,%.2f\n", r.ref_size, r.ns_per_decision);
    if (rows.size() >= 2) {
        const double ratio = rows.back().ns_per_decision / rows.front().ns_per_decision;
        std::printf("ratio %u/%u: %.2fx\n", rows.back().ref_size, rows.front().ref_size, ratio);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"window-based CEP engine with utility-driven load shedding"};
    app.require_subcommand(1);

    std::string config_path, out_dir, axis, model_path;
    std::vector<double> values;
    std::vector<std::uint32_t> bench_sizes{2'000, 16'000};
    std::uint32_t bench_types = 500;
    std::uint64_t bench_iters = 2'000'000;
    std::uint64_t bench_seed = 1;

    auto* run = app.add_subcommand("run", "run one experiment from a config file");
    run->add_option("config", config_path)->required();
    run->add_option("--out", out_dir, "override out_dir");

    auto* sw = app.add_subcommand("sweep", "run an axis sweep");
    sw->add_option("config", config_path)->required();
    sw->add_option("--axis", axis, "pattern_size|window_size|bin_size|rate")->required();
    sw->add_option("--values", values)->required()->delimiter(',');
    sw->add_option("--out", out_dir, "override out_dir");

    auto* model = app.add_subcommand("model", "model snapshot export/import");
    model->require_subcommand(1);
    auto* mexp = model->add_subcommand("export", "train from a config and write the model CSV");
    mexp->add_option("path", model_path)->required();
    mexp->add_option("--config", config_path)->required();
    auto* mimp = model->add_subcommand("import", "load and validate a model CSV");
    mimp->add_option("path", model_path)->required();

    auto* bench = app.add_subcommand("bench-shedder", "drop-decision microbenchmark");
    bench->add_option("--sizes", bench_sizes)->delimiter(',');
    bench->add_option("--types", bench_types);
    bench->add_option("--iters", bench_iters);
    bench->add_option("--seed", bench_seed);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return run_cmd(config_path, out_dir);
        if (sw->parsed()) return sweep_cmd(config_path, axis, values, out_dir);
        if (model->parsed()) {
            if (mexp->parsed()) return model_export_cmd(model_path, config_path);
            return model_import_cmd(model_path);
        }
        if (bench->parsed()) return bench_cmd(bench_sizes, bench_types, bench_iters, bench_seed);
    } catch (const espice::ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
