#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace espice {

using TypeId = std::uint32_t;
using SeqNo = std::uint64_t;
using WindowId = std::uint64_t;

struct Attr {
    std::string name;
    double value = 0.0;
};

// Primitive input record. type_id is a dense index into the TypeRegistry so
// utility-table lookups stay plain array indexing.
struct Event {
    TypeId type_id = 0;
    SeqNo seq_no = 0;
    std::int64_t timestamp_ms = 0;
    std::vector<Attr> payload;
};

// One (type, per-window position) contributor of a detected match.
struct Contributor {
    TypeId type_id = 0;
    std::uint32_t position = 0; // 1-based position within the window

    friend bool operator==(const Contributor&, const Contributor&) = default;
    friend auto operator<=>(const Contributor&, const Contributor&) = default;
};

struct ComplexEvent {
    WindowId detection_window = 0;
    std::vector<Contributor> contributors; // ordered by position, strictly increasing
    SeqNo emit_seq = 0;                    // seq_no of the event that completed the match
};

// Maps event-type names to dense ids in first-seen order.
class TypeRegistry {
public:
    TypeId intern(const std::string& name) {
        auto it = index_.find(name);
        if (it != index_.end()) return it->second;
        TypeId id = static_cast<TypeId>(names_.size());
        index_.emplace(name, id);
        names_.push_back(name);
        return id;
    }

    // -1 style lookup: returns count() when unknown.
    TypeId find(const std::string& name) const {
        auto it = index_.find(name);
        return it == index_.end() ? static_cast<TypeId>(names_.size()) : it->second;
    }

    const std::string& name(TypeId id) const { return names_.at(id); }
    std::size_t count() const { return names_.size(); }

private:
    std::unordered_map<std::string, TypeId> index_;
    std::vector<std::string> names_;
};

} // namespace espice
