#include "espice/pattern.hpp"

#include "espice/errors.hpp"

#include <algorithm>

namespace espice {

void Pattern::validate() const {
    if (kind == Kind::Sequence) {
        if (steps.empty()) throw ConfigError("pattern: steps must not be empty");
        if (steps.size() < 2) throw ConfigError("pattern: sequence needs >= 2 steps");
    } else {
        if (candidates.empty()) throw ConfigError("pattern: candidate set must not be empty");
        if (any_n < 1) throw ConfigError("pattern: any_n must be >= 1");
        if (std::find(candidates.begin(), candidates.end(), head) != candidates.end())
            throw ConfigError("pattern: head type may not be in the candidate set");
    }
}

std::vector<std::vector<TypeId>> Pattern::step_sets() const {
    std::vector<std::vector<TypeId>> sets;
    if (kind == Kind::Sequence) {
        sets.reserve(steps.size());
        for (TypeId t : steps) sets.push_back({t});
    } else {
        sets.reserve(1 + any_n);
        sets.push_back({head});
        for (std::uint32_t i = 0; i < any_n; ++i) sets.push_back(candidates);
    }
    return sets;
}

std::size_t Pattern::arity() const {
    return kind == Kind::Sequence ? steps.size() : 1 + static_cast<std::size_t>(any_n);
}

} // namespace espice
