#pragma once

#include "espice/event.hpp"

#include <cstdint>
#include <vector>

namespace espice {

// A pattern is a chain of steps; each step accepts a set of event types.
// Plain sequences use singleton steps (repetition = the same type appearing in
// several steps). Sequence-with-any is a head step followed by `n` steps that
// all accept the candidate set.
struct Pattern {
    enum class Kind { Sequence, SequenceAny };
    enum class Selection { First, Last };
    enum class Consumption { Consumed, Zero };

    Kind kind = Kind::Sequence;
    std::vector<TypeId> steps;       // Sequence: ordered types, repeats allowed
    TypeId head = 0;                 // SequenceAny
    std::uint32_t any_n = 0;         // SequenceAny
    std::vector<TypeId> candidates;  // SequenceAny

    Selection selection = Selection::First;
    Consumption consumption = Consumption::Consumed;
    bool one_match_per_window = true;

    void validate() const;

    // The step chain as acceptance sets, in order.
    std::vector<std::vector<TypeId>> step_sets() const;
    std::size_t arity() const;
};

} // namespace espice
