#pragma once

#include "espice/utility_model.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace espice {

// Throughput/latency parameters fixed at profiling time. q_max is the longest
// queue that still meets the latency bound.
struct LatencyModel {
    double th = 0.0;             // events/second the operator can sustain
    double l_p = 0.0;            // seconds per event, 1/th
    double latency_bound_s = 1.0;
    double f = 0.8;              // shedding trigger fraction of q_max

    double q_max() const { return latency_bound_s / l_p; }
};

struct QueueState {
    std::size_t q_size = 0;
    // Estimated end-to-end latency of the event at queue position n.
    double estimated_latency_s(std::size_t n, const LatencyModel& lm) const {
        return static_cast<double>(n) * lm.l_p;
    }
};

// "Drop x events from each partition" directive.
struct ShedCommand {
    bool active = false;
    std::uint32_t x = 0;
    std::uint32_t rho = 1;
    double p_size = 0.0; // raw positions per partition
    double issued_at_s = 0.0;
};

// Watches the input queue, decides when shedding starts/stops, and sizes the
// partitioning and per-partition drop amount.
class OverloadDetector {
public:
    struct Params {
        double latency_bound_s = 1.0;
        double f = 0.8;
        std::uint32_t period_events = 100; // processed events between checks
        double stop_hysteresis = 0.9;      // stop at q <= hysteresis * f * q_max
    };

    explicit OverloadDetector(Params p);

    // Profiling: feed per-event simulated processing costs from a no-shedding
    // warm-up, then freeze the latency model.
    void observe_processed(double cost_s);
    LatencyModel finish_profiling(); // NotReadyError on an empty probe
    bool profiled() const { return profiled_; }
    bool probe_empty() const { return probe_events_ == 0 || probe_cost_s_ <= 0.0; }
    const LatencyModel& model() const;
    void set_f(double f); // apply a choose_f result after profiling

    enum class Decision { Start, Stop, NoChange };
    Decision check(const QueueState& q);
    bool active() const { return active_; }

    const Params& params() const { return params_; }

    // rho = ceil(ws / (q_max - f q_max)), p_size = ws / rho.
    static std::pair<std::uint32_t, double> partitioning(std::uint32_t ws, const LatencyModel& lm);

    // x = ceil(max(0, R - th) * p_size / R); rounds up so the bound errs safe.
    static std::uint32_t drop_amount(double rate, const LatencyModel& lm, double p_size);

    // Largest grid f whose induced partitions each hold >= x_hint cells in the
    // bottom utility tercile; falls back to `fallback` when none qualifies.
    static double choose_f(const UtilityTable& ut, std::uint32_t x_hint, double q_max,
                           std::uint32_t ws, double fallback = 0.8);

private:
    Params params_;
    bool profiled_ = false;
    bool active_ = false;
    LatencyModel model_;
    std::uint64_t probe_events_ = 0;
    double probe_cost_s_ = 0.0;
};

} // namespace espice
