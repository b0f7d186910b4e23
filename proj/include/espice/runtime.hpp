#pragma once

#include "espice/matcher.hpp"
#include "espice/overload.hpp"
#include "espice/shedder.hpp"
#include "espice/stream.hpp"
#include "espice/utility_model.hpp"
#include "espice/window.hpp"

#include <cstdint>
#include <deque>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace espice {

struct RuntimeConfig {
    double core_membership_rate = 10'000.0; // matcher capacity, memberships/second
    double duration_s = 60.0;
    double training_fraction = 0.2;         // share of the run fed before overload
    double overload_factor = 0.0;           // post-training rate = factor * profiled th
    std::vector<std::pair<double, double>> rate_steps; // (at_seconds, factor of th)
    bool uncapped = false;                  // oracle mode: zero processing cost, no shedding

    // Window-size variation: multipliers cycled over windows opened during
    // training, and the single multiplier used afterwards.
    std::vector<double> train_size_cycle;
    double shed_size_multiplier = 1.0;

    bool f_auto = false;
    double x_hint_fraction = 0.0; // choose_f hint; 0 derives it from overload_factor
};

struct RunTrace {
    struct LatencyRec {
        SeqNo seq_no = 0;
        double arrival_s = 0.0;
        double latency_ms = 0.0;
    };
    struct DropRec {
        SeqNo seq_no = 0;
        WindowId window = 0;
        std::uint32_t position = 0;
        int utility = -1;
        int u_th = -1;
    };
    struct ShedMark {
        double at_s = 0.0;
        bool active = false;
        std::uint32_t x = 0;
    };

    std::vector<LatencyRec> latencies;
    std::vector<ComplexEvent> complex_events;
    std::vector<DropRec> drops;
    std::vector<ShedMark> shed_timeline;

    std::uint64_t events_processed = 0;
    std::uint64_t memberships_in = 0;
    std::uint64_t memberships_matched = 0;
    std::uint64_t memberships_dropped = 0;

    double profiled_th = 0.0;
    double l_p = 0.0;
    double f = 0.0;
    std::uint32_t rho = 0;
    double p_size = 0.0;
    double train_end_s = 0.0;
    double end_s = 0.0;

    double mean_shed_decision_ns = 0.0;

    double latency_percentile_ms(double pct, double from_s = 0.0) const;
    double max_latency_ms(double from_s = 0.0) const;

    // latency.csv, complex.csv, drops.csv under `dir` (created if missing).
    void write_csv(const std::string& dir) const;
};

// The operator event loop under a simulated clock: FIFO input queue,
// throughput-capped processing, detector -> shedder -> matcher wiring.
class OperatorRuntime {
public:
    OperatorRuntime(WindowSpec window_spec, Pattern pattern, UtilityModel::Params model_params,
                    OverloadDetector::Params detector_params, RuntimeConfig cfg,
                    std::uint32_t type_count, std::string shedder_kind,
                    std::uint64_t shedder_seed);

    RunTrace run(PacedSource& source);

    const UtilityModel& model() const { return *model_; }
    UtilityModel& model() { return *model_; }

private:
    WindowSpec window_spec_;
    Pattern pattern_;
    OverloadDetector::Params detector_params_;
    RuntimeConfig cfg_;
    std::uint32_t type_count_;
    std::string shedder_kind_;
    std::uint64_t shedder_seed_;
    std::unique_ptr<UtilityModel> model_;
};

// Same pipeline with shedding disabled and no throughput cap; the reference
// complex-event set for quality measurement.
RunTrace oracle_run(const WindowSpec& window_spec, const Pattern& pattern,
                    std::uint32_t type_count, PacedSource& source, const RuntimeConfig& cfg);

} // namespace espice
