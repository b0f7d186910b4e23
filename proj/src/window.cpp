#include "espice/window.hpp"

#include "espice/errors.hpp"

#include <algorithm>
#include <cmath>

namespace espice {

void WindowSpec::validate() const {
    if (ws == 0) throw ConfigError("window: ws must be > 0");
    if (open_rule == Open::EveryKEvents && slide == 0)
        throw ConfigError("window: slide must be > 0");
    if (open_rule == Open::TypeSet && open_types.empty())
        throw ConfigError("window: open type set must not be empty");
    if (max_open == 0) throw ConfigError("window: max_open must be > 0");
}

Windower::Windower(WindowSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    for (TypeId t : spec_.open_types) {
        if (t >= open_type_mask_.size()) open_type_mask_.resize(t + 1, false);
        open_type_mask_[t] = true;
    }
}

bool Windower::open_fires(const Event& ev) const {
    if (spec_.open_rule == WindowSpec::Open::EveryKEvents)
        return (events_seen_ - 1) % spec_.slide == 0;
    return ev.type_id < open_type_mask_.size() && open_type_mask_[ev.type_id];
}

void Windower::retire(std::map<WindowId, Window>::iterator it) {
    it->second.closed = true;
    closed_buffer_.push_back(std::move(it->second));
}

RouteResult Windower::route(const Event& ev, const OpenHints& hints) {
    RouteResult res;
    ++events_seen_;

    // Expire time windows first: an event at or past the window end never joins.
    if (spec_.close_rule == WindowSpec::Close::TimeMs) {
        for (auto it = open_.begin(); it != open_.end();) {
            if (ev.timestamp_ms >= it->second.open_ts_ms + static_cast<std::int64_t>(it->second.close_limit)) {
                res.closed.push_back(it->first);
                retire(it);
                it = open_.erase(it);
            } else {
                ++it;
            }
        }
    }

    if (open_fires(ev)) {
        Window w;
        w.id = next_id_++;
        w.open_seq = ev.seq_no;
        w.open_ts_ms = ev.timestamp_ms;
        w.close_limit = std::max<std::uint64_t>(
            1, static_cast<std::uint64_t>(std::llround(static_cast<double>(spec_.ws) * hints.size_multiplier)));
        w.expected_size = spec_.close_rule == WindowSpec::Close::Count
                              ? static_cast<std::uint32_t>(w.close_limit)
                              : hints.predicted_size;
        res.opened.push_back(w.id);
        open_.emplace(w.id, std::move(w));
        if (open_.size() > spec_.max_open)
            throw ConfigError("window: open window count exceeds max_open (" +
                              std::to_string(spec_.max_open) + ")");
    }

    for (auto it = open_.begin(); it != open_.end();) {
        Window& w = it->second;
        w.events.push_back({ev.seq_no, ev.type_id, ++w.size_events});
        res.joined.push_back({w.id, w.size_events, w.expected_size});
        if (spec_.close_rule == WindowSpec::Close::Count && w.size_events >= w.close_limit) {
            res.closed.push_back(it->first);
            retire(it);
            it = open_.erase(it);
        } else {
            ++it;
        }
    }
    return res;
}

const Window* Windower::find(WindowId id) const {
    auto it = open_.find(id);
    return it == open_.end() ? nullptr : &it->second;
}

std::vector<Window> Windower::take_closed() {
    std::vector<Window> out;
    out.swap(closed_buffer_);
    return out;
}

void Windower::close_all() {
    for (auto it = open_.begin(); it != open_.end(); ++it) retire(it);
    open_.clear();
}

} // namespace espice
