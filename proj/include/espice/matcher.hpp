#pragma once

#include "espice/event.hpp"
#include "espice/pattern.hpp"

#include <deque>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace espice {

// Detects pattern instances inside each window independently, with
// skip-till-next/any-match semantics. Selection policy decides which
// instances bind when several could; consumption policy decides whether a
// bound instance may be reused.
//
// first: each step keeps a FIFO of partial matches; extension takes the
//        oldest. last: each step keeps a single partial that newer arrivals
//        overwrite. Under consumed consumption, contributors of an emitted
//        match can never bind again (extension pops under first; intersecting
//        slots are cleared under last).
class Matcher {
public:
    explicit Matcher(Pattern pattern);

    // Feeds one (window, position) membership. Events must be fed in window
    // order with dense positions. Returns matches completed by this event.
    std::vector<ComplexEvent> feed(WindowId window, const Event& ev, std::uint32_t position);

    void on_window_closed(WindowId window);

    const Pattern& pattern() const { return pattern_; }

    // Exact (type, position) pairs bound in a match, ordered by position.
    static std::vector<Contributor> contributors(const ComplexEvent& ce) { return ce.contributors; }

private:
    using Partial = std::vector<Contributor>; // bound (type, position) for steps 0..i

    struct WindowState {
        bool done = false;                      // one_match_per_window emitted
        std::vector<std::deque<Partial>> queues;      // selection = first
        std::vector<std::optional<Partial>> slots;    // selection = last
        std::unordered_set<std::uint32_t> consumed;   // positions, consumption = consumed
    };

    Pattern pattern_;
    std::vector<std::vector<TypeId>> steps_;
    std::size_t arity_ = 0;
    std::unordered_map<WindowId, WindowState> states_;
    std::unordered_set<WindowId> closed_;

    bool step_accepts(std::size_t step, TypeId t) const;
};

} // namespace espice
