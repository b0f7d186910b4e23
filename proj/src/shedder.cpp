#include "espice/shedder.hpp"

#include "espice/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace espice {

ShedPlan thresholds_for(std::uint32_t x, const ModelSnapshot* snapshot) {
    ShedPlan plan;
    plan.snapshot = snapshot;
    if (x == 0 || snapshot == nullptr) return plan; // nothing to drop

    plan.active = true;
    plan.u_th.reserve(snapshot->cdts.size());
    for (const auto& cdt : snapshot->cdts) {
        int th = ShedPlan::kDropAll;
        for (int u = 0; u <= 100; ++u) {
            if (cdt.values[static_cast<std::size_t>(u)] >= static_cast<double>(x)) {
                th = u;
                break;
            }
        }
        plan.u_th.push_back(th);
    }
    return plan;
}

bool apply_ls(TypeId t, std::uint32_t pos, std::uint32_t ws, const ShedPlan& plan) {
    if (!plan.active) return false;
    const ModelSnapshot& snap = *plan.snapshot;
    const std::uint32_t part = snap.partition_index(pos, ws);
    const int th = plan.u_th[part];
    if (th == ShedPlan::kDropAll) return true;
    return snap.utility(t, pos, ws) <= th;
}

double BaselinePlan::expected_drop_fraction(const std::vector<double>& type_freq) const {
    double d = 0.0;
    for (std::size_t t = 0; t < type_freq.size(); ++t)
        d += type_freq[t] * (t < drop_prob.size() ? drop_prob[t] : 1.0);
    return d;
}

BaselinePlan build_baseline_plan(const Pattern& pattern, const std::vector<double>& type_freq,
                                 double target_fraction) {
    BaselinePlan plan;
    plan.target_fraction = std::clamp(target_fraction, 0.0, 1.0);
    plan.drop_prob.assign(type_freq.size(), 0.0);
    if (plan.target_fraction <= 0.0) return plan;
    plan.active = true;

    // Type utility = pattern repetitions + 1.
    std::vector<double> util(type_freq.size(), 1.0);
    for (const auto& set : pattern.step_sets())
        for (TypeId t : set)
            if (t < util.size()) util[t] += 1.0;

    const double freq_total = std::accumulate(type_freq.begin(), type_freq.end(), 0.0);
    if (freq_total <= 0.0) return plan;

    // d_T = min(1, lambda / util_T); water-fill lambda until the expected
    // overall drop fraction meets the target.
    auto fraction_at = [&](double lambda) {
        double d = 0.0;
        for (std::size_t t = 0; t < type_freq.size(); ++t)
            d += type_freq[t] / freq_total * std::min(1.0, lambda / util[t]);
        return d;
    };

    const double max_util = *std::max_element(util.begin(), util.end());
    if (fraction_at(max_util) <= plan.target_fraction) {
        plan.drop_prob.assign(type_freq.size(), 1.0); // demand exceeds supply
        return plan;
    }
    double lo = 0.0, hi = max_util;
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        (fraction_at(mid) < plan.target_fraction ? lo : hi) = mid;
    }
    for (std::size_t t = 0; t < type_freq.size(); ++t)
        plan.drop_prob[t] = std::min(1.0, hi / util[t]);
    return plan;
}

namespace {

double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

} // namespace

bool bl_decide(TypeId t, const BaselinePlan& plan, Rng& rng) {
    if (!plan.active) return false;
    const double p = t < plan.drop_prob.size() ? plan.drop_prob[t] : 1.0;
    return uniform01(rng) < p;
}

bool random_decide(double p, Rng& rng) {
    if (p < 0.0 || p > 1.0) throw UsageError("random_decide: p outside [0,1]");
    return uniform01(rng) < p;
}

namespace {

class NoneShedder final : public Shedder {
public:
    void on_command(const ShedCommand&, const ModelSnapshot*) override {}
    bool drop(TypeId, std::uint32_t, std::uint32_t) override { return false; }
    const char* name() const override { return "none"; }
};

class EspiceShedder final : public Shedder {
public:
    void on_command(const ShedCommand& cmd, const ModelSnapshot* snapshot) override {
        plan_ = cmd.active ? thresholds_for(cmd.x, snapshot) : ShedPlan{};
    }
    bool drop(TypeId t, std::uint32_t pos, std::uint32_t ws) override {
        if (!plan_.active) return false;
        const ModelSnapshot& snap = *plan_.snapshot;
        last_part_ = snap.partition_index(pos, ws);
        last_u_ = snap.utility(t, pos, ws);
        last_th_ = plan_.u_th[last_part_];
        if (last_th_ == ShedPlan::kDropAll) return true;
        return last_u_ <= last_th_;
    }
    bool wants_model() const override { return true; }
    const char* name() const override { return "espice"; }
    int last_utility() const override { return last_u_; }
    int last_threshold() const override { return last_th_; }

private:
    ShedPlan plan_;
    std::uint32_t last_part_ = 0;
    int last_u_ = -1;
    int last_th_ = -1;
};

// Overall drop fraction a command demands: x per partition, rho partitions,
// over a window of rho * p_size events.
double command_fraction(const ShedCommand& cmd) {
    if (!cmd.active || cmd.p_size <= 0.0) return 0.0;
    return std::min(1.0, static_cast<double>(cmd.x) / cmd.p_size);
}

class BlShedder final : public Shedder {
public:
    BlShedder(std::uint64_t seed, Pattern pattern) : rng_(seed), pattern_(std::move(pattern)) {}

    void on_command(const ShedCommand& cmd, const ModelSnapshot* snapshot) override {
        if (!cmd.active || snapshot == nullptr) {
            plan_ = BaselinePlan{};
            return;
        }
        // Type frequencies from the learned occupancy shares.
        const auto& sh = snapshot->shares;
        std::vector<double> freq(sh.type_count, 0.0);
        double total = 0.0;
        for (TypeId t = 0; t < sh.type_count; ++t) {
            for (std::uint32_t c = 1; c <= sh.columns; ++c) freq[t] += sh.at(t, c);
            total += freq[t];
        }
        if (total > 0.0)
            for (double& f : freq) f /= total;
        plan_ = build_baseline_plan(pattern_, freq, command_fraction(cmd));
    }
    bool drop(TypeId t, std::uint32_t, std::uint32_t) override { return bl_decide(t, plan_, rng_); }
    bool wants_model() const override { return true; }
    const char* name() const override { return "bl"; }

private:
    Rng rng_;
    Pattern pattern_;
    BaselinePlan plan_;
};

class RandomShedder final : public Shedder {
public:
    explicit RandomShedder(std::uint64_t seed) : rng_(seed) {}
    void on_command(const ShedCommand& cmd, const ModelSnapshot*) override {
        p_ = command_fraction(cmd);
    }
    bool drop(TypeId, std::uint32_t, std::uint32_t) override { return random_decide(p_, rng_); }
    const char* name() const override { return "random"; }

private:
    Rng rng_;
    double p_ = 0.0;
};

} // namespace

std::unique_ptr<Shedder> make_shedder(const std::string& kind, std::uint64_t rng_seed,
                                      const Pattern& pattern) {
    if (kind == "none") return std::make_unique<NoneShedder>();
    if (kind == "espice") return std::make_unique<EspiceShedder>();
    if (kind == "bl") return std::make_unique<BlShedder>(rng_seed, pattern);
    if (kind == "random") return std::make_unique<RandomShedder>(rng_seed);
    throw ConfigError("unknown shedder: " + kind + " (want espice|bl|random|none)");
}

} // namespace espice
