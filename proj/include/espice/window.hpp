#pragma once

#include "espice/event.hpp"

#include <cstdint>
#include <map>
#include <vector>

namespace espice {

struct WindowSpec {
    enum class Open { EveryKEvents, TypeSet };
    enum class Close { Count, TimeMs };

    Open open_rule = Open::EveryKEvents;
    std::uint64_t slide = 1;          // EveryKEvents: one window per `slide` events
    std::vector<TypeId> open_types;   // TypeSet: window per event of these types

    Close close_rule = Close::Count;
    std::uint64_t ws = 1;             // events (Count) or milliseconds (TimeMs)

    std::size_t max_open = 10'000;

    void validate() const;
};

// One (event, window) membership. Positions are dense and 1-based per window.
struct Membership {
    SeqNo seq_no = 0;
    TypeId type_id = 0;
    std::uint32_t position = 0;
};

struct Window {
    WindowId id = 0;
    SeqNo open_seq = 0;
    std::int64_t open_ts_ms = 0;
    std::uint64_t close_limit = 0;    // events or ms, after the open-time size multiplier
    std::uint32_t size_events = 0;
    bool closed = false;
    std::vector<Membership> events;
    // Expected final event count; exact for count windows, a rate-based
    // estimate for time windows (0 when no estimate was available).
    std::uint32_t expected_size = 0;
};

struct RouteResult {
    struct Joined {
        WindowId window = 0;
        std::uint32_t position = 0;
        std::uint32_t expected_size = 0; // window's expected final event count
    };
    std::vector<Joined> joined;
    std::vector<WindowId> opened;
    std::vector<WindowId> closed;
};

struct OpenHints {
    double size_multiplier = 1.0;      // scales spec.ws for a window opened now
    std::uint32_t predicted_size = 0;  // expected events for time windows
};

// Splits the ordered stream into possibly overlapping windows. Single-owner:
// state belongs to the operator-runtime thread.
class Windower {
public:
    explicit Windower(WindowSpec spec);

    // Expires due windows, opens a new one if the open rule fires, then admits
    // the event to every still-open window. Events must arrive in stream order.
    RouteResult route(const Event& ev, const OpenHints& hints = OpenHints{});

    const Window* find(WindowId id) const;
    std::size_t open_count() const { return open_.size(); }

    // Windows closed since the last call, in close order; ownership moves out.
    std::vector<Window> take_closed();

    // Marks every remaining window closed (end of stream).
    void close_all();

private:
    WindowSpec spec_;
    std::vector<bool> open_type_mask_;
    std::map<WindowId, Window> open_;
    std::vector<Window> closed_buffer_;
    WindowId next_id_ = 1;
    std::uint64_t events_seen_ = 0;

    bool open_fires(const Event& ev) const;
    void retire(std::map<WindowId, Window>::iterator it);
};

} // namespace espice
