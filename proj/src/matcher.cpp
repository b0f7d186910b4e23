#include "espice/matcher.hpp"

#include "espice/errors.hpp"

#include <algorithm>

namespace espice {

Matcher::Matcher(Pattern pattern) : pattern_(std::move(pattern)) {
    pattern_.validate();
    steps_ = pattern_.step_sets();
    arity_ = steps_.size();
}

bool Matcher::step_accepts(std::size_t step, TypeId t) const {
    const auto& set = steps_[step];
    return std::find(set.begin(), set.end(), t) != set.end();
}

std::vector<ComplexEvent> Matcher::feed(WindowId window, const Event& ev, std::uint32_t position) {
    if (closed_.count(window))
        throw UsageError("matcher: feed into closed window " + std::to_string(window));

    WindowState& st = states_[window];
    std::vector<ComplexEvent> out;
    if (st.done) return out;

    const bool first = pattern_.selection == Pattern::Selection::First;
    const bool consumed = pattern_.consumption == Pattern::Consumption::Consumed;
    if (first && st.queues.empty()) st.queues.resize(arity_);
    if (!first && st.slots.empty()) st.slots.resize(arity_);

    const Contributor me{ev.type_id, position};

    // Deepest step first so an event never extends a partial it just created.
    for (std::size_t i = arity_; i-- > 0;) {
        if (!step_accepts(i, ev.type_id)) continue;

        if (i == 0) {
            if (first) {
                st.queues[0].push_back({me});
            } else {
                st.slots[0] = Partial{me};
            }
            continue;
        }

        Partial prefix;
        if (first) {
            if (st.queues[i - 1].empty()) continue;
            prefix = st.queues[i - 1].front();
            if (consumed) st.queues[i - 1].pop_front();
        } else {
            if (!st.slots[i - 1]) continue;
            prefix = *st.slots[i - 1];
        }

        Partial extended = prefix;
        extended.push_back(me);

        if (i + 1 < arity_) {
            if (first) {
                st.queues[i].push_back(std::move(extended));
            } else {
                st.slots[i] = std::move(extended);
            }
            continue;
        }

        // Completed a full match.
        ComplexEvent ce;
        ce.detection_window = window;
        ce.contributors = extended;
        ce.emit_seq = ev.seq_no;
        out.push_back(std::move(ce));

        if (pattern_.one_match_per_window) {
            st.done = true;
            st.queues.clear();
            st.slots.clear();
            break;
        }

        if (consumed) {
            for (const auto& c : extended) st.consumed.insert(c.position);
            auto hits_consumed = [&](const Partial& part) {
                return std::any_of(part.begin(), part.end(), [&](const Contributor& c) {
                    return st.consumed.count(c.position) > 0;
                });
            };
            // Consumed instances can never bind again: purge every partial
            // that holds one.
            for (auto& q : st.queues)
                std::erase_if(q, hits_consumed);
            for (auto& slot : st.slots)
                if (slot && hits_consumed(*slot)) slot.reset();
            break; // the completer itself is consumed now
        }
    }
    return out;
}

void Matcher::on_window_closed(WindowId window) {
    states_.erase(window);
    closed_.insert(window);
}

} // namespace espice
