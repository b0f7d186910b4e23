#pragma once

// Test-only reference matcher: instead of incremental queue/slot state it
// rebuilds, for every potential completing event, the unique policy-selected
// binding chain over the window prefix.
//
// first:  p_i = earliest unconsumed instance accepted by step i with
//         p_{i-1} < p_i < completer.
// last:   walking backwards from the completer, p_i = the latest instance
//         accepted by step i before p_{i+1}; the chain dies if that instance
//         is consumed (later instances supersede earlier ones for good).

#include "espice/event.hpp"
#include "espice/pattern.hpp"

#include <algorithm>
#include <optional>
#include <set>
#include <vector>

namespace espice::testing {

inline bool accepts(const std::vector<TypeId>& set, TypeId t) {
    return std::find(set.begin(), set.end(), t) != set.end();
}

// window: types by position (index 0 = position 1).
inline std::vector<std::vector<Contributor>> oracle_matches(const Pattern& pattern,
                                                            const std::vector<TypeId>& window) {
    const auto steps = pattern.step_sets();
    const std::size_t k = steps.size();
    const bool first = pattern.selection == Pattern::Selection::First;
    const bool consumed = pattern.consumption == Pattern::Consumption::Consumed;

    std::set<std::uint32_t> used; // consumed positions
    std::vector<std::vector<Contributor>> out;

    auto type_at = [&](std::uint32_t pos) { return window[pos - 1]; };

    auto forward_chain = [&](std::uint32_t completer) -> std::optional<std::vector<std::uint32_t>> {
        std::vector<std::uint32_t> chain;
        std::uint32_t from = 1;
        for (std::size_t i = 0; i + 1 < k; ++i) {
            std::optional<std::uint32_t> pick;
            for (std::uint32_t p = from; p < completer; ++p) {
                if (!accepts(steps[i], type_at(p))) continue;
                if (consumed && used.count(p)) continue;
                pick = p;
                break;
            }
            if (!pick) return std::nullopt;
            chain.push_back(*pick);
            from = *pick + 1;
        }
        return chain;
    };

    auto backward_chain = [&](std::uint32_t completer) -> std::optional<std::vector<std::uint32_t>> {
        std::vector<std::uint32_t> chain(k - 1);
        std::uint32_t before = completer;
        for (std::size_t i = k - 1; i-- > 0;) {
            std::optional<std::uint32_t> latest;
            for (std::uint32_t p = 1; p < before; ++p)
                if (accepts(steps[i], type_at(p))) latest = p;
            if (!latest) return std::nullopt;
            if (consumed && used.count(*latest)) return std::nullopt;
            chain[i] = *latest;
            before = *latest;
        }
        return chain;
    };

    for (std::uint32_t c = 1; c <= window.size(); ++c) {
        if (!accepts(steps[k - 1], type_at(c))) continue;
        auto chain = first ? forward_chain(c) : backward_chain(c);
        if (!chain) continue;

        std::vector<Contributor> match;
        for (std::uint32_t p : *chain) match.push_back({type_at(p), p});
        match.push_back({type_at(c), c});
        out.push_back(match);

        if (consumed) {
            for (std::uint32_t p : *chain) used.insert(p);
            used.insert(c);
        }
        if (pattern.one_match_per_window) break;
    }
    return out;
}

} // namespace espice::testing
