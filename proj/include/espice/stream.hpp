#pragma once

#include "espice/event.hpp"
#include "espice/rng.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace espice {

// Single-consumer ordered event source. Hand each instance to exactly one
// runtime; there is no shared mutation behind it.
class StreamSource {
public:
    virtual ~StreamSource() = default;
    virtual std::optional<Event> next() = 0;
};

// A planted type correlation: whenever `trigger` is emitted, `correlated`
// follows `offset` events later (offset drawn uniformly from
// [offset_min, offset_max]) with probability `prob`.
struct CorrelationRule {
    TypeId trigger = 0;
    TypeId correlated = 0;
    std::uint32_t offset_min = 1;
    std::uint32_t offset_max = 1;
    double prob = 1.0;
};

struct SynthConfig {
    std::uint32_t type_count = 0;
    std::vector<CorrelationRule> rules;
    double base_rate = 1000.0;       // events/second, drives timestamps
    std::vector<double> noise_mix;   // per-type background weight, size == type_count
    std::uint64_t seed = 1;

    void validate() const; // throws ConfigError on bad probabilities/offsets
};

// Deterministic synthetic stream: pure function of (cfg, count).
std::vector<Event> generate_synthetic(const SynthConfig& cfg, std::size_t count);

class SyntheticSource final : public StreamSource {
public:
    SyntheticSource(SynthConfig cfg, std::size_t count);
    std::optional<Event> next() override;

private:
    SynthConfig cfg_;
    std::size_t remaining_;
    SeqNo next_seq_ = 1;
    double time_ms_ = 0.0;
    Rng rng_;
    std::map<SeqNo, TypeId> pending_; // scheduled correlated emissions by seq_no
    std::vector<double> noise_cdf_;

    TypeId draw_type(SeqNo at);
};

// Replays `seq_no,timestamp_ms,type_name[,attr=value...]` lines. `#` starts a
// comment. Type names are interned into `registry` in first-seen order.
class FileReplaySource final : public StreamSource {
public:
    FileReplaySource(const std::string& path, TypeRegistry& registry);
    std::optional<Event> next() override;

private:
    struct Impl;
    std::shared_ptr<Impl> impl_;
};

// Piecewise-constant arrival rate: `rate_at(t)` gives events/second. Steps can
// be appended while a run is in progress (the R1/R2 overload injections).
class RateSchedule {
public:
    explicit RateSchedule(double initial_rate);
    void add_step(double at_seconds, double rate);
    double rate_at(double t_seconds) const;

private:
    std::map<double, double> steps_; // start time -> rate
};

// Assigns simulated arrival times to an inner source by integrating the rate
// schedule: consecutive arrivals are 1/rate apart.
class PacedSource {
public:
    PacedSource(std::unique_ptr<StreamSource> inner, RateSchedule schedule);

    struct Arrival {
        Event event;
        double at_seconds = 0.0;
    };
    std::optional<Arrival> next();

    void set_rate(double from_seconds, double rate);
    const RateSchedule& schedule() const { return schedule_; }

private:
    std::unique_ptr<StreamSource> inner_;
    RateSchedule schedule_;
    double clock_s_ = 0.0;
    bool first_ = true;
};

} // namespace espice
