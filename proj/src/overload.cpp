#include "espice/overload.hpp"

#include "espice/errors.hpp"

#include <algorithm>
#include <cmath>

namespace espice {

OverloadDetector::OverloadDetector(Params p) : params_(p) {
    if (p.latency_bound_s <= 0) throw ConfigError("detector: latency bound must be > 0");
    if (p.f < 0.0 || p.f > 1.0) throw ConfigError("detector: f must be in [0,1]");
    if (p.period_events == 0) throw ConfigError("detector: period must be > 0");
    if (p.stop_hysteresis <= 0.0 || p.stop_hysteresis > 1.0)
        throw ConfigError("detector: stop hysteresis must be in (0,1]");
}

void OverloadDetector::observe_processed(double cost_s) {
    ++probe_events_;
    probe_cost_s_ += cost_s;
}

LatencyModel OverloadDetector::finish_profiling() {
    if (probe_events_ == 0 || probe_cost_s_ <= 0.0)
        throw NotReadyError("detector: empty throughput probe");
    model_.th = static_cast<double>(probe_events_) / probe_cost_s_;
    model_.l_p = 1.0 / model_.th;
    model_.latency_bound_s = params_.latency_bound_s;
    model_.f = params_.f;
    profiled_ = true;
    return model_;
}

const LatencyModel& OverloadDetector::model() const {
    if (!profiled_) throw NotReadyError("detector: not profiled");
    return model_;
}

void OverloadDetector::set_f(double f) {
    if (f < 0.0 || f > 1.0) throw ConfigError("detector: f must be in [0,1]");
    params_.f = f;
    model_.f = f;
}

OverloadDetector::Decision OverloadDetector::check(const QueueState& q) {
    const LatencyModel& lm = model(); // throws if unprofiled
    // epsilon keeps `q_size > f*q_max` strict despite the 1/l_p round-trip
    const double trigger = lm.f * lm.q_max() + 1e-9;
    if (!active_ && static_cast<double>(q.q_size) > trigger) {
        active_ = true;
        return Decision::Start;
    }
    if (active_ && static_cast<double>(q.q_size) <= params_.stop_hysteresis * trigger) {
        active_ = false;
        return Decision::Stop;
    }
    return Decision::NoChange;
}

std::pair<std::uint32_t, double> OverloadDetector::partitioning(std::uint32_t ws,
                                                                const LatencyModel& lm) {
    if (ws < 1) throw UsageError("partitioning: ws must be >= 1");
    const double buffer = lm.q_max() * (1.0 - lm.f);
    if (buffer < 1.0)
        throw ConfigError("partitioning: f too high for this throughput/latency bound "
                          "(buffer below one event)");
    // absolute epsilon so 1/l_p round-trip noise cannot flip an exact boundary
    const auto rho =
        static_cast<std::uint32_t>(std::ceil(static_cast<double>(ws) / buffer - 1e-9));
    return {std::max(rho, 1u), static_cast<double>(ws) / std::max(rho, 1u)};
}

std::uint32_t OverloadDetector::drop_amount(double rate, const LatencyModel& lm, double p_size) {
    if (rate <= 0.0) throw UsageError("drop_amount: rate must be > 0");
    const double delta = rate - lm.th;
    if (delta <= 0.0) return 0;
    return static_cast<std::uint32_t>(std::ceil(delta * p_size / rate));
}

double OverloadDetector::choose_f(const UtilityTable& ut, std::uint32_t x_hint, double q_max,
                                  std::uint32_t ws, double fallback) {
    if (ut.cells.empty()) throw NotReadyError("choose_f: model not built");

    const auto [mn, mx] = std::minmax_element(ut.cells.begin(), ut.cells.end());
    const int low_class_max = static_cast<int>(*mn) + (static_cast<int>(*mx) - *mn) / 3;

    static constexpr double kGrid[] = {0.9, 0.8, 0.7, 0.6, 0.5};
    for (double f : kGrid) {
        const double buffer = q_max * (1.0 - f);
        if (buffer < 1.0) continue;
        const auto rho = std::min<std::uint32_t>(
            static_cast<std::uint32_t>(std::ceil(static_cast<double>(ws) / buffer - 1e-9)),
            ut.columns);
        const ColumnPartitions parts{ut.columns, std::max<std::uint32_t>(rho, 1)};

        bool ok = true;
        for (std::uint32_t k = 0; k < parts.rho && ok; ++k) {
            std::uint32_t low_cells = 0;
            for (std::uint32_t col = parts.begin(k); col < parts.end(k); ++col)
                for (TypeId t = 0; t < ut.type_count; ++t)
                    if (ut.at(t, col) <= low_class_max) ++low_cells;
            ok = low_cells >= x_hint;
        }
        if (ok) return f;
    }
    return fallback;
}

} // namespace espice
