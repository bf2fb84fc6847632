#pragma once

#include <optional>
#include <string>
#include <vector>

namespace sdnv {

/// Door choice of one hidden layer. `active` is the first all-positive
/// group, `inactive` the first all-negative one; either may be absent.
struct DoorAssignment {
    std::optional<int> active;
    std::optional<int> inactive;

    bool both() const { return active.has_value() && inactive.has_value(); }
    auto operator<=>(const DoorAssignment&) const = default;
};

/// One DoorAssignment per hidden layer, first hidden layer first.
using ActivationPattern = std::vector<DoorAssignment>;

/// "[[g,g'],[g,g']]" with "-" for an absent door, e.g. "[[18,1],[1,15]]".
std::string to_string(const ActivationPattern& pattern);

/// Inverse of to_string. Throws std::invalid_argument on malformed text.
ActivationPattern parse_pattern(const std::string& text);

}  // namespace sdnv
