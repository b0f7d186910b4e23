#include "espice/errors.hpp"
#include "espice/rng.hpp"
#include "espice/shedder.hpp"

#include "table_fixture.hpp"

#include <doctest.h>

#include <algorithm>

using namespace espice;

namespace {

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Draw one window realization from the share distribution and count how many
// positions the plan drops in each partition.
std::vector<std::uint32_t> sample_window_drops(const ModelSnapshot& snap, const ShedPlan& plan,
                                               Rng& rng) {
    std::vector<std::uint32_t> drops(snap.partitions.rho, 0);
    for (std::uint32_t p = 1; p <= snap.ut.ref_size; ++p) {
        const std::uint32_t col = snap.ut.column_of(p);
        const double cov = snap.ut.column_coverage(col);
        double u = uniform01(rng) * cov;
        TypeId type = snap.ut.type_count - 1;
        for (TypeId t = 0; t < snap.ut.type_count; ++t) {
            u -= snap.shares.at(t, col);
            if (u <= 0.0) {
                type = t;
                break;
            }
        }
        if (apply_ls(type, p, snap.ut.ref_size, plan))
            ++drops[snap.partition_index(p, snap.ut.ref_size)];
    }
    return drops;
}

} // namespace

TEST_CASE("worked example: x=2 yields u_th=10") {
    auto snap = testing::example_snapshot();
    auto plan = thresholds_for(2, &snap);
    REQUIRE(plan.active);
    REQUIRE(plan.u_th.size() == 1);
    CHECK(plan.u_th[0] == 10);
}

TEST_CASE("x=0 yields an inactive plan that never drops") {
    auto snap = testing::example_snapshot();
    auto plan = thresholds_for(0, &snap);
    CHECK_FALSE(plan.active);
    CHECK_FALSE(apply_ls(0, 3, 5, plan));
}

TEST_CASE("threshold equals a linear-scan oracle on random monotone CDTs") {
    Rng rng(4242);
    for (int trial = 0; trial < 500; ++trial) {
        ModelSnapshot snap = testing::example_snapshot();
        // replace the CDT with a random monotone array
        double acc = 0.0;
        for (int u = 0; u <= 100; ++u) {
            acc += static_cast<double>(rng() % 100) / 25.0;
            snap.cdts[0].values[static_cast<std::size_t>(u)] = acc;
        }
        const auto x = static_cast<std::uint32_t>(1 + rng() % 300);
        auto plan = thresholds_for(x, &snap);

        int expect = ShedPlan::kDropAll;
        for (int u = 0; u <= 100; ++u)
            if (snap.cdts[0].values[static_cast<std::size_t>(u)] >= static_cast<double>(x)) {
                expect = u;
                break;
            }
        CHECK(plan.u_th[0] == expect);
    }
}

TEST_CASE("u_th minimality: one step lower no longer covers x") {
    Rng rng(5150);
    for (int trial = 0; trial < 200; ++trial) {
        ModelSnapshot snap = testing::example_snapshot(1 + trial % 3);
        const auto x = static_cast<std::uint32_t>(1 + rng() % 4);
        auto plan = thresholds_for(x, &snap);
        for (std::size_t k = 0; k < plan.u_th.size(); ++k) {
            const int th = plan.u_th[k];
            if (th == ShedPlan::kDropAll || th == 0) continue;
            CHECK(snap.cdts[k].values[static_cast<std::size_t>(th - 1)] < static_cast<double>(x));
            CHECK(snap.cdts[k].values[static_cast<std::size_t>(th)] >= static_cast<double>(x));
        }
    }
}

TEST_CASE("apply_ls on the worked table: drop (A,3), keep (A,1)") {
    auto snap = testing::example_snapshot();
    auto plan = thresholds_for(2, &snap); // u_th = 10
    CHECK(apply_ls(0, 3, 5, plan));       // utility 10 <= 10
    CHECK_FALSE(apply_ls(0, 1, 5, plan)); // utility 70 > 10
}

TEST_CASE("drop-all sentinel fires when x exceeds the partition mass") {
    auto snap = testing::example_snapshot();
    auto plan = thresholds_for(50, &snap); // partition mass is 5
    REQUIRE(plan.active);
    CHECK(plan.u_th[0] == ShedPlan::kDropAll);
    CHECK(apply_ls(0, 1, 5, plan)); // even the best cell drops
}

TEST_CASE("threshold drop guarantee over sampled windows") {
    auto snap = testing::example_snapshot();
    const std::uint32_t x = 2;
    auto plan = thresholds_for(x, &snap);

    Rng rng(2718);
    std::uint64_t partitions_total = 0, partitions_ok = 0;
    for (int w = 0; w < 2000; ++w) {
        for (std::uint32_t d : sample_window_drops(snap, plan, rng)) {
            ++partitions_total;
            if (d >= x) ++partitions_ok;
        }
    }
    CHECK(static_cast<double>(partitions_ok) >= 0.95 * static_cast<double>(partitions_total));
}

TEST_CASE("per-window independence of the drop decision") {
    auto snap = testing::example_snapshot();
    auto plan = thresholds_for(2, &snap);
    // same event, different windows/positions: decisions depend only on the
    // (type, position, ws) coordinates
    const bool in_w1 = apply_ls(0, 3, 5, plan);
    const bool in_w2 = apply_ls(0, 1, 5, plan);
    CHECK(in_w1);
    CHECK_FALSE(in_w2);
    // repeated evaluation is stable (pure function of the plan snapshot)
    for (int i = 0; i < 10; ++i) {
        CHECK(apply_ls(0, 3, 5, plan) == in_w1);
        CHECK(apply_ls(0, 1, 5, plan) == in_w2);
    }
}

TEST_CASE("baseline: repetition in the pattern raises the keep probability") {
    Pattern p;
    p.kind = Pattern::Kind::Sequence;
    p.steps = {0, 0, 1}; // type 0 repeats twice, type 1 once
    const std::vector<double> freq = {0.4, 0.4, 0.2};
    auto plan = build_baseline_plan(p, freq, 0.3);
    REQUIRE(plan.active);
    CHECK(plan.drop_prob[0] < plan.drop_prob[1]); // more repetitions -> kept more
    CHECK(plan.drop_prob[1] < plan.drop_prob[2]); // non-pattern type dropped first
}

TEST_CASE("baseline expected drop fraction matches the target analytically") {
    Pattern p;
    p.kind = Pattern::Kind::Sequence;
    p.steps = {0, 1};
    Rng rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> freq(4);
        double total = 0.0;
        for (auto& f : freq) {
            f = 0.05 + static_cast<double>(rng() % 100);
            total += f;
        }
        for (auto& f : freq) f /= total;
        const double target = static_cast<double>(rng() % 80) / 100.0;
        auto plan = build_baseline_plan(p, freq, target);
        CHECK(plan.expected_drop_fraction(freq) == doctest::Approx(target).epsilon(1e-6));
    }
}

TEST_CASE("baseline with zero target never drops") {
    Pattern p;
    p.kind = Pattern::Kind::Sequence;
    p.steps = {0, 1};
    auto plan = build_baseline_plan(p, {0.5, 0.5}, 0.0);
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) CHECK_FALSE(bl_decide(0, plan, rng));
}

TEST_CASE("baseline sampling hits its per-type probability") {
    Pattern p;
    p.kind = Pattern::Kind::Sequence;
    p.steps = {0, 1};
    auto plan = build_baseline_plan(p, {0.5, 0.3, 0.2}, 0.3);
    Rng rng(31);
    const int n = 100'000;
    int drops = 0;
    for (int i = 0; i < n; ++i) drops += bl_decide(2, plan, rng) ? 1 : 0;
    CHECK(static_cast<double>(drops) / n == doctest::Approx(plan.drop_prob[2]).epsilon(0.035));
}

TEST_CASE("random shedder trivials and Monte-Carlo rate") {
    Rng rng(13);
    for (int i = 0; i < 100; ++i) CHECK_FALSE(random_decide(0.0, rng));
    for (int i = 0; i < 100; ++i) CHECK(random_decide(1.0, rng));
    int drops = 0;
    const int n = 100'000;
    for (int i = 0; i < n; ++i) drops += random_decide(0.5, rng) ? 1 : 0;
    CHECK(static_cast<double>(drops) / n == doctest::Approx(0.5).epsilon(0.02));
    CHECK_THROWS_AS(random_decide(1.5, rng), UsageError);
}

TEST_CASE("decision latency is flat in the table width") {
    // smoke-sized version of the scaling microbenchmark (full bound is an
    // acceptance criterion)
    auto snap_for = [](std::uint32_t n) {
        ModelSnapshot snap;
        snap.ut = UtilityTable::zeros(4, n, 1);
        Rng rng(n);
        for (auto& c : snap.ut.cells) c = static_cast<std::uint8_t>(rng() % 101);
        snap.partitions = ColumnPartitions{n, 2};
        return snap;
    };
    auto s1 = snap_for(64), s2 = snap_for(4096);
    ShedPlan p1, p2;
    p1.active = p2.active = true;
    p1.u_th = {40, 60};
    p2.u_th = {40, 60};
    p1.snapshot = &s1;
    p2.snapshot = &s2;
    int acc = 0;
    for (std::uint32_t p = 1; p <= 64; ++p) acc += apply_ls(1, p, 64, p1) ? 1 : 0;
    for (std::uint32_t p = 1; p <= 4096; ++p) acc += apply_ls(1, p, 4096, p2) ? 1 : 0;
    CHECK(acc > 0); // both paths executed; timing asserted in acceptance
}
