#pragma once

// Rule back-propagation: maps "output is class k" through the network, one
// activation pattern at a time, to linear rules over the input.

#include "sdnv/linrules.hpp"
#include "sdnv/pattern.hpp"
#include "sdnv/sdn.hpp"

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

namespace sdnv {

/// Serial number of an activation pattern; the sort key of the region index.
struct PatternKey {
    std::uint64_t number = 0;
    auto operator<=>(const PatternKey&) const = default;
};

/// "Some neuron of group `group` in hidden layer `layer` is negative"
/// (or positive when `negative` is false). `disjuncts` holds one inequality
/// per neuron of the group, in input coordinates once attached to a Region.
struct ImplicitConstraint {
    int layer = 0;
    int group = 0;
    bool negative = true;
    RuleDNF disjuncts;

    bool holds(const Vector& point) const { return disjuncts.holds(point); }
};

struct ImplicitRules {
    std::vector<ImplicitConstraint> constraints;

    bool holds(const Vector& point) const;
};

struct Region {
    int class_label = 0;
    ActivationPattern pattern;
    RuleConjunction explicit_rules;
    ImplicitRules implicit_rules;
    PatternKey key;
    std::optional<Box> box;
    bool populated = false;

    bool satisfies_explicit(const Vector& x) const { return explicit_rules.holds(x); }
    bool contains(const Vector& x) const {
        return explicit_rules.holds(x) && implicit_rules.holds(x);
    }
};

/// Rules on the last hidden layer meaning "logit k beats every other logit".
RuleConjunction map_out(int k, const AffineMap& output_map);

/// The part of MAP-FIX that rewrites `rule` itself: active-door variables are
/// replaced by alpha times their pre-activation polynomial, inactive-door
/// variables are dropped, the rest take the plain polynomial.
LinearInequality inherit_rule(const LinearInequality& rule, const DoorAssignment& doors,
                              int group_size, const AffineMap& layer_map, double alpha);

/// Sign conditions of the door neurons: pre-activation > 0 on the active
/// door, < 0 on the inactive door. Rules live on layer_map's source layer.
RuleConjunction door_constraints(const DoorAssignment& doors, int group_size,
                                 const AffineMap& layer_map);

/// inherit_rule(rule) together with door_constraints.
RuleConjunction map_fix(const DoorAssignment& doors, int group_size, const LinearInequality& rule,
                        const AffineMap& layer_map, double alpha);

/// Per-layer pattern count m(m-1) + 2m + 1.
std::uint64_t layer_pattern_count(int groups);

/// Every door choice of a layer with `groups` groups, in serial-number order.
std::vector<DoorAssignment> enumerate_layer_patterns(int groups);

/// Mixed-radix serial number. An absent door is encoded as index `groups`,
/// which sorts after every real group.
PatternKey pattern_number(const ActivationPattern& pattern, const std::vector<int>& group_counts);

/// Inverse of pattern_number.
ActivationPattern pattern_from_number(PatternKey key, const std::vector<int>& group_counts);

/// Product of per-layer counts; throws std::overflow_error past 2^64.
std::uint64_t pattern_universe_size(const std::vector<int>& group_counts);

/// The minimality constraints of one hidden layer, expressed on that layer's
/// input coordinates (layer_map's source layer).
std::vector<ImplicitConstraint> implicit_constraints(const DoorAssignment& doors, int group_size,
                                                     int groups, const AffineMap& layer_map,
                                                     int hidden_index);

/// Explicit rules, implicit rules (both in input coordinates), key and
/// bounding box of the region "class k under `pattern`".
Region region_rules(const SDNetwork& net, int k, const ActivationPattern& pattern);

/// Rewrites a rule on the input of hidden layer `hidden_index` down to the
/// network input, following `pattern` through the layers below.
LinearInequality pull_back(const SDNetwork& net, const ActivationPattern& pattern,
                           int hidden_index, LinearInequality rule);

struct RegionKey {
    int class_label = 0;
    PatternKey pattern;
    auto operator<=>(const RegionKey&) const = default;
};

/// Ordered in-memory index over regions, keyed by (class, serial number).
class RegionIndex {
public:
    using Map = std::map<RegionKey, Region>;

    /// Throws ContractViolation on a duplicate key.
    void insert(Region region);
    const Region* find(const RegionKey& key) const;
    std::size_t size() const { return map_.size(); }
    Map::const_iterator begin() const { return map_.begin(); }
    Map::const_iterator end() const { return map_.end(); }

private:
    Map map_;
};

RegionIndex build_region_index(std::vector<Region> regions);

/// Plain ReLU network for the exhaustive reference mapper.
struct ReluNetwork {
    std::vector<AffineMap> layers;  // hidden layers, then the output layer
    int classes = 0;

    int hidden_neurons() const;
};

inline constexpr int kReluMapperNeuronCap = 14;

/// Enumerates every on/off pattern of every hidden neuron and returns the
/// input-space DNF of "output is class k". Refuses nets with more than
/// kReluMapperNeuronCap hidden neurons (std::invalid_argument).
RuleDNF dnn_map_reference(const ReluNetwork& net, int k);

}  // namespace sdnv
