#include "espice/runtime.hpp"

#include "espice/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace espice {

double RunTrace::latency_percentile_ms(double pct, double from_s) const {
    std::vector<double> vals;
    vals.reserve(latencies.size());
    for (const auto& r : latencies)
        if (r.arrival_s >= from_s) vals.push_back(r.latency_ms);
    if (vals.empty()) return 0.0;
    std::sort(vals.begin(), vals.end());
    const auto idx = static_cast<std::size_t>(std::clamp(pct, 0.0, 100.0) / 100.0 *
                                              static_cast<double>(vals.size() - 1));
    return vals[idx];
}

double RunTrace::max_latency_ms(double from_s) const {
    double mx = 0.0;
    for (const auto& r : latencies)
        if (r.arrival_s >= from_s) mx = std::max(mx, r.latency_ms);
    return mx;
}

void RunTrace::write_csv(const std::string& dir) const {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    char buf[64];
    {
        std::ofstream out(dir + "/latency.csv");
        out << "seq_no,l_e_ms\n";
        for (const auto& r : latencies) {
            std::snprintf(buf, sizeof buf, "%llu,%.6f\n",
                          static_cast<unsigned long long>(r.seq_no), r.latency_ms);
            out << buf;
        }
    }
    {
        std::ofstream out(dir + "/complex.csv");
        out << "window_id,contributors\n";
        for (const auto& ce : complex_events) {
            out << ce.detection_window << ',';
            for (std::size_t i = 0; i < ce.contributors.size(); ++i) {
                if (i) out << ';';
                out << ce.contributors[i].type_id << ':' << ce.contributors[i].position;
            }
            out << '\n';
        }
    }
    {
        std::ofstream out(dir + "/drops.csv");
        out << "seq_no,window_id,position,utility,u_th\n";
        for (const auto& d : drops)
            out << d.seq_no << ',' << d.window << ',' << d.position << ',' << d.utility << ','
                << d.u_th << '\n';
    }
}

OperatorRuntime::OperatorRuntime(WindowSpec window_spec, Pattern pattern,
                                 UtilityModel::Params model_params,
                                 OverloadDetector::Params detector_params, RuntimeConfig cfg,
                                 std::uint32_t type_count, std::string shedder_kind,
                                 std::uint64_t shedder_seed)
    : window_spec_(std::move(window_spec)),
      pattern_(std::move(pattern)),
      detector_params_(detector_params),
      cfg_(std::move(cfg)),
      type_count_(type_count),
      shedder_kind_(std::move(shedder_kind)),
      shedder_seed_(shedder_seed),
      model_(std::make_unique<UtilityModel>(type_count, model_params)) {
    window_spec_.validate();
    pattern_.validate();
    make_shedder(shedder_kind_, 0, pattern_); // fail fast on unknown kinds
    if (cfg_.core_membership_rate <= 0) throw ConfigError("runtime: core rate must be > 0");
    if (cfg_.training_fraction < 0 || cfg_.training_fraction >= 1.0)
        throw ConfigError("runtime: training_fraction must be in [0,1)");
}

namespace {

struct QueuedEvent {
    Event ev;
    double arrival_s = 0.0;
};

} // namespace

RunTrace OperatorRuntime::run(PacedSource& source) {
    RunTrace trace;
    Windower windower(window_spec_);
    Matcher matcher(pattern_);
    OverloadDetector detector(detector_params_);
    auto shedder = make_shedder(shedder_kind_, shedder_seed_, pattern_);
    const bool collect_stats = !cfg_.uncapped;

    const double l_m = 1.0 / cfg_.core_membership_rate;
    const double train_end_s = cfg_.duration_s * cfg_.training_fraction;
    trace.train_end_s = train_end_s;

    std::deque<QueuedEvent> queue;
    auto pending = source.next();
    double server_free_s = 0.0;
    bool finalized = false;
    double rate_est = 0.0;
    double p_size_events = 0.0;
    std::uint32_t rho = 1;
    ShedCommand cmd;
    const ModelSnapshot* last_snap = nullptr;

    std::uint64_t arrivals = 0;
    std::uint64_t arrivals_at_check = 0;
    double check_time_s = 0.0;
    std::uint64_t opened_windows = 0;

    // Contributor positions per window, recorded into the model at close time
    // when the window's true size is known.
    std::unordered_map<WindowId, std::vector<Contributor>> contrib_buf;

    std::uint64_t shed_ns_total = 0;
    std::uint64_t shed_timed = 0;
    std::uint64_t shed_calls = 0;

    auto finalize = [&]() {
        finalized = true;
        if (cfg_.uncapped) return;
        const bool model_ready = model_->contribution_count() > 0 && model_->window_count() > 0;
        if (shedder->wants_model() && !model_ready)
            throw NotReadyError("runtime: shedder needs a trained model but training "
                                "produced no contributor statistics");
        if (shedder_kind_ == "none" && detector.probe_empty()) return;
        if (detector.probe_empty())
            throw NotReadyError("runtime: shedding configured but the training phase "
                                "processed no events");
        LatencyModel lm = detector.finish_profiling();
        std::uint32_t n = model_->ref_size();
        if (n == 0) {
            // No training windows (model-less shedders): size partitions from
            // the window spec instead.
            n = window_spec_.close_rule == WindowSpec::Close::Count
                    ? static_cast<std::uint32_t>(window_spec_.ws)
                    : std::max(1u, static_cast<std::uint32_t>(std::llround(
                                       rate_est * static_cast<double>(window_spec_.ws) / 1000.0)));
        }

        if (cfg_.f_auto && model_ready) {
            double hint_fraction = cfg_.x_hint_fraction;
            if (hint_fraction <= 0.0 && cfg_.overload_factor > 1.0)
                hint_fraction = 1.0 - 1.0 / cfg_.overload_factor;
            auto [rho0, psize0] = OverloadDetector::partitioning(n, lm);
            (void)rho0;
            const auto x_hint = static_cast<std::uint32_t>(std::ceil(hint_fraction * psize0));
            lm.f = OverloadDetector::choose_f(model_->build_ut(), std::max(1u, x_hint), lm.q_max(),
                                              n, detector_params_.f);
            detector.set_f(lm.f);
        }
        trace.f = lm.f;
        trace.profiled_th = lm.th;
        trace.l_p = lm.l_p;

        auto [r, p] = OverloadDetector::partitioning(n, lm);
        rho = r;
        p_size_events = p;
        trace.rho = rho;
        trace.p_size = p_size_events;
        if (model_ready) model_->publish(rho);

        if (cfg_.overload_factor > 0.0) source.set_rate(train_end_s, cfg_.overload_factor * lm.th);
        for (const auto& [at_s, factor] : cfg_.rate_steps) source.set_rate(at_s, factor * lm.th);
    };

    auto pull_arrivals = [&]() {
        while (pending && pending->at_seconds <= server_free_s &&
               pending->at_seconds <= cfg_.duration_s) {
            if (!finalized && pending->at_seconds >= train_end_s) finalize();
            queue.push_back({std::move(pending->event), pending->at_seconds});
            ++arrivals;
            pending = source.next();
        }
    };

    while (true) {
        pull_arrivals();
        if (queue.empty()) {
            if (!pending || pending->at_seconds > cfg_.duration_s) break;
            server_free_s = pending->at_seconds;
            continue;
        }

        QueuedEvent qe = std::move(queue.front());
        queue.pop_front();
        ++trace.events_processed;

        // Periodic detector work: rate estimate, start/stop check, drop amount.
        if (!cfg_.uncapped && trace.events_processed % detector_params_.period_events == 0) {
            const double now = server_free_s;
            const double elapsed = now - check_time_s;
            if (elapsed > 0.0 && arrivals > arrivals_at_check) {
                const double inst = static_cast<double>(arrivals - arrivals_at_check) / elapsed;
                rate_est = rate_est == 0.0 ? inst : 0.1 * inst + 0.9 * rate_est;
                check_time_s = now;
                arrivals_at_check = arrivals;

                if (finalized && detector.profiled()) {
                    detector.check(QueueState{queue.size()});
                    ShedCommand next;
                    if (detector.active()) {
                        const auto x =
                            OverloadDetector::drop_amount(inst, detector.model(), p_size_events);
                        next = ShedCommand{x > 0, x, rho, p_size_events, now};
                    }
                    const ModelSnapshot* snap = model_->snapshot();
                    if (next.active != cmd.active || next.x != cmd.x || snap != last_snap) {
                        cmd = next;
                        last_snap = snap;
                        shedder->on_command(cmd, snap);
                        trace.shed_timeline.push_back({now, cmd.active, cmd.x});
                    }
                }
            }
        }

        const bool training = qe.arrival_s < train_end_s;

        OpenHints hints;
        if (training && !cfg_.train_size_cycle.empty())
            hints.size_multiplier = cfg_.train_size_cycle[opened_windows % cfg_.train_size_cycle.size()];
        else if (!training)
            hints.size_multiplier = cfg_.shed_size_multiplier;
        if (window_spec_.close_rule == WindowSpec::Close::TimeMs && rate_est > 0.0)
            hints.predicted_size = static_cast<std::uint32_t>(std::llround(
                rate_est * static_cast<double>(window_spec_.ws) * hints.size_multiplier / 1000.0));

        RouteResult res = windower.route(qe.ev, hints);
        opened_windows += res.opened.size();

        const std::uint32_t fallback_ws =
            model_->snapshot() ? model_->snapshot()->ut.ref_size : model_->ref_size();
        std::uint32_t survivors = 0;
        for (const auto& j : res.joined) {
            bool dropped = false;
            if (finalized && cmd.active) {
                const std::uint32_t ws = j.expected_size ? j.expected_size : std::max(1u, fallback_ws);
                ++shed_calls;
                if (shed_calls % 64 == 0) {
                    const auto t0 = std::chrono::steady_clock::now();
                    dropped = shedder->drop(qe.ev.type_id, j.position, ws);
                    shed_ns_total += static_cast<std::uint64_t>(
                        std::chrono::duration_cast<std::chrono::nanoseconds>(
                            std::chrono::steady_clock::now() - t0)
                            .count());
                    ++shed_timed;
                } else {
                    dropped = shedder->drop(qe.ev.type_id, j.position, ws);
                }
                if (dropped) {
                    ++trace.memberships_dropped;
                    trace.drops.push_back({qe.ev.seq_no, j.window, j.position,
                                           shedder->last_utility(), shedder->last_threshold()});
                }
            }
            if (!dropped) {
                ++survivors;
                for (auto& ce : matcher.feed(j.window, qe.ev, j.position)) {
                    if (collect_stats) {
                        auto& buf = contrib_buf[ce.detection_window];
                        buf.insert(buf.end(), ce.contributors.begin(), ce.contributors.end());
                    }
                    trace.complex_events.push_back(std::move(ce));
                }
            }
        }
        trace.memberships_in += res.joined.size();
        trace.memberships_matched += survivors;

        // Close handling runs after the memberships: the event that fills a
        // count window is part of that window.
        for (Window& w : windower.take_closed()) {
            matcher.on_window_closed(w.id);
            if (collect_stats) {
                model_->observe_window(w);
                auto it = contrib_buf.find(w.id);
                if (it != contrib_buf.end()) {
                    for (const auto& c : it->second)
                        model_->record_contribution(c.type_id, c.position, w.size_events);
                    contrib_buf.erase(it);
                }
                model_->on_window_closed();
            }
        }

        const double cost_s = cfg_.uncapped ? 0.0 : l_m * survivors;
        const double start_s = std::max(server_free_s, qe.arrival_s);
        const double finish_s = start_s + cost_s;
        server_free_s = finish_s;
        if (!cfg_.uncapped && !finalized) detector.observe_processed(cost_s);

        trace.latencies.push_back(
            {qe.ev.seq_no, qe.arrival_s, (finish_s - qe.arrival_s) * 1000.0});
    }

    // End of stream: retire leftover windows without treating them as complete
    // training windows.
    windower.close_all();
    for (Window& w : windower.take_closed()) matcher.on_window_closed(w.id);

    trace.end_s = server_free_s;
    trace.mean_shed_decision_ns =
        shed_timed ? static_cast<double>(shed_ns_total) / static_cast<double>(shed_timed) : 0.0;
    return trace;
}

RunTrace oracle_run(const WindowSpec& window_spec, const Pattern& pattern,
                    std::uint32_t type_count, PacedSource& source, const RuntimeConfig& cfg) {
    RuntimeConfig oracle_cfg = cfg;
    oracle_cfg.uncapped = true;
    oracle_cfg.overload_factor = 0.0;
    oracle_cfg.rate_steps.clear();
    OperatorRuntime rt(window_spec, pattern, UtilityModel::Params{}, OverloadDetector::Params{},
                       oracle_cfg, type_count, "none", 0);
    return rt.run(source);
}

} // namespace espice
