#pragma once

#include "espice/overload.hpp"
#include "espice/pattern.hpp"
#include "espice/rng.hpp"
#include "espice/utility_model.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace espice {

// Per-partition utility thresholds derived from the CDT arrays. An event is
// dropped when its utility is <= the threshold of its partition. kDropAll
// marks partitions where even utility 100 cannot cover the demanded x.
struct ShedPlan {
    static constexpr int kDropAll = 101;

    bool active = false;
    std::vector<int> u_th;               // one per partition
    double p_size = 0.0;
    const ModelSnapshot* snapshot = nullptr;
};

// Algorithm: u_th(part) = first u in 0..100 with CDT(part, u) >= x.
ShedPlan thresholds_for(std::uint32_t x, const ModelSnapshot* snapshot);

// O(1) drop decision: one utility lookup plus one compare.
bool apply_ls(TypeId t, std::uint32_t pos, std::uint32_t ws, const ShedPlan& plan);

// Position-blind baseline: per-type drop probabilities allocated inversely to
// type utility (pattern repetitions + 1), sized so the expected overall drop
// fraction matches the target.
struct BaselinePlan {
    bool active = false;
    std::vector<double> drop_prob; // per type_id
    double target_fraction = 0.0;

    double expected_drop_fraction(const std::vector<double>& type_freq) const;
};

BaselinePlan build_baseline_plan(const Pattern& pattern, const std::vector<double>& type_freq,
                                 double target_fraction);

bool bl_decide(TypeId t, const BaselinePlan& plan, Rng& rng);
bool random_decide(double p, Rng& rng); // UsageError when p outside [0,1]

// Strategy interface used by the runtime: a ShedCommand (plus the current
// model snapshot) becomes an immutable per-event decision function.
class Shedder {
public:
    virtual ~Shedder() = default;
    virtual void on_command(const ShedCommand& cmd, const ModelSnapshot* snapshot) = 0;
    virtual bool drop(TypeId t, std::uint32_t pos, std::uint32_t ws) = 0;
    virtual bool wants_model() const { return false; }
    virtual const char* name() const = 0;

    // Diagnostics for the drop log; meaningful for the utility shedder only.
    virtual int last_utility() const { return -1; }
    virtual int last_threshold() const { return -1; }
};

std::unique_ptr<Shedder> make_shedder(const std::string& kind, std::uint64_t rng_seed,
                                      const Pattern& pattern);

} // namespace espice
