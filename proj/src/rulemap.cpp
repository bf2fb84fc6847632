#include "sdnv/rulemap.hpp"

#include <limits>
#include <stdexcept>
#include <string>

namespace sdnv {

bool ImplicitRules::holds(const Vector& point) const {
    for (const auto& c : constraints) {
        if (!c.holds(point)) return false;
    }
    return true;
}

RuleConjunction map_out(int k, const AffineMap& output_map) {
    if (k < 0 || k >= output_map.out_dim()) throw ContractViolation("map_out: class out of range");
    RuleConjunction out;
    out.layer = output_map.source_layer;
    const Vector wk = output_map.weights.row(k).transpose();
    for (Eigen::Index j = 0; j < output_map.out_dim(); ++j) {
        if (j == k) continue;
        Vector c = wk - output_map.weights.row(j).transpose();
        out.add(LinearInequality(output_map.source_layer, std::move(c),
                                 output_map.biases[k] - output_map.biases[j])
                    .normalized());
    }
    return out;
}

LinearInequality inherit_rule(const LinearInequality& rule, const DoorAssignment& doors,
                              int group_size, const AffineMap& layer_map, double alpha) {
    const Vector scale = sda_slopes(layer_map.out_dim(), doors, group_size, alpha);
    return substitute_affine(rule, layer_map, scale);
}

RuleConjunction door_constraints(const DoorAssignment& doors, int group_size,
                                 const AffineMap& layer_map) {
    RuleConjunction out;
    out.layer = layer_map.source_layer;
    auto emit = [&](int group, Relation rel) {
        for (int i = group * group_size; i < (group + 1) * group_size; ++i) {
            out.add(LinearInequality::make(layer_map.source_layer,
                                           layer_map.weights.row(i).transpose(),
                                           layer_map.biases[i], rel)
                        .normalized());
        }
    };
    if (doors.active) emit(*doors.active, Relation::Greater);
    if (doors.inactive) emit(*doors.inactive, Relation::Less);
    return out;
}

RuleConjunction map_fix(const DoorAssignment& doors, int group_size, const LinearInequality& rule,
                        const AffineMap& layer_map, double alpha) {
    RuleConjunction out;
    out.layer = layer_map.source_layer;
    out.add(inherit_rule(rule, doors, group_size, layer_map, alpha));
    out.append(door_constraints(doors, group_size, layer_map));
    return out;
}

std::uint64_t layer_pattern_count(int groups) {
    const auto m = static_cast<std::uint64_t>(groups);
    return m * (m - 1) + 2 * m + 1;
}

std::vector<DoorAssignment> enumerate_layer_patterns(int groups) {
    if (groups < 1) throw ContractViolation("enumerate_layer_patterns: need at least one group");
    std::vector<DoorAssignment> out;
    out.reserve(layer_pattern_count(groups));
    auto door = [groups](int g) { return g == groups ? std::optional<int>{} : std::optional<int>{g}; };
    for (int a = 0; a <= groups; ++a) {
        for (int i = 0; i <= groups; ++i) {
            if (a == i && a < groups) continue;
            out.push_back({door(a), door(i)});
        }
    }
    return out;
}

namespace {

// Per-layer rank. With both doors present this is the expression
// g*m + g' - [g < g']; index m stands for an absent door.
std::uint64_t layer_code(const DoorAssignment& d, int groups) {
    const auto m = static_cast<std::uint64_t>(groups);
    const std::uint64_t a = d.active ? static_cast<std::uint64_t>(*d.active) : m;
    const std::uint64_t i = d.inactive ? static_cast<std::uint64_t>(*d.inactive) : m;
    if (a > m || i > m || (a == i && a < m)) {
        throw ContractViolation("pattern_number: invalid door indices");
    }
    return a * m + i - ((i > a && a < m) ? 1 : 0);
}

DoorAssignment layer_from_code(std::uint64_t code, int groups) {
    const auto m = static_cast<std::uint64_t>(groups);
    // Codes of active index a span [a*m, (a+1)*m) for a < m, then m^2..m^2+m.
    const std::uint64_t a = std::min(code / m, m);
    std::uint64_t i = code - a * m;
    if (a < m && i >= a) ++i;
    DoorAssignment d;
    if (a < m) d.active = static_cast<int>(a);
    if (i < m) d.inactive = static_cast<int>(i);
    return d;
}

}  // namespace

std::uint64_t pattern_universe_size(const std::vector<int>& group_counts) {
    std::uint64_t total = 1;
    for (int m : group_counts) {
        const std::uint64_t c = layer_pattern_count(m);
        if (total > std::numeric_limits<std::uint64_t>::max() / c) {
            throw std::overflow_error("pattern universe exceeds 64-bit serial numbers");
        }
        total *= c;
    }
    return total;
}

PatternKey pattern_number(const ActivationPattern& pattern, const std::vector<int>& group_counts) {
    if (pattern.size() != group_counts.size()) {
        throw ContractViolation("pattern_number: pattern depth differs from network");
    }
    pattern_universe_size(group_counts);
    std::uint64_t number = 0;
    for (std::size_t h = 0; h < pattern.size(); ++h) {
        number = number * layer_pattern_count(group_counts[h]) + layer_code(pattern[h], group_counts[h]);
    }
    return {number};
}

ActivationPattern pattern_from_number(PatternKey key, const std::vector<int>& group_counts) {
    if (key.number >= pattern_universe_size(group_counts)) {
        throw ContractViolation("pattern_from_number: key out of range");
    }
    ActivationPattern out(group_counts.size());
    std::uint64_t rest = key.number;
    for (std::size_t h = group_counts.size(); h-- > 0;) {
        const std::uint64_t radix = layer_pattern_count(group_counts[h]);
        out[h] = layer_from_code(rest % radix, group_counts[h]);
        rest /= radix;
    }
    return out;
}

std::vector<ImplicitConstraint> implicit_constraints(const DoorAssignment& doors, int group_size,
                                                     int groups, const AffineMap& layer_map,
                                                     int hidden_index) {
    std::vector<ImplicitConstraint> out;
    const int active_limit = doors.active.value_or(groups);
    const int inactive_limit = doors.inactive.value_or(groups);
    auto make = [&](int j, bool negative) {
        ImplicitConstraint c;
        c.layer = hidden_index;
        c.group = j;
        c.negative = negative;
        c.disjuncts.layer = layer_map.source_layer;
        for (int i = j * group_size; i < (j + 1) * group_size; ++i) {
            RuleConjunction single;
            single.add(LinearInequality::make(layer_map.source_layer,
                                              layer_map.weights.row(i).transpose(),
                                              layer_map.biases[i],
                                              negative ? Relation::Less : Relation::Greater)
                           .normalized());
            c.disjuncts.clauses.push_back(std::move(single));
        }
        out.push_back(std::move(c));
    };
    for (int j = 0; j < groups; ++j) {
        // Groups before the active door must not be all-positive, groups
        // before the inactive door must not be all-negative.
        if (j < active_limit && j != doors.inactive) make(j, true);
        if (j < inactive_limit && j != doors.active) make(j, false);
    }
    return out;
}

LinearInequality pull_back(const SDNetwork& net, const ActivationPattern& pattern,
                           int hidden_index, LinearInequality rule) {
    for (int l = hidden_index - 1; l >= 0; --l) {
        rule = inherit_rule(rule, pattern[l], net.group_size[l], net.layers[l], net.alpha);
    }
    return rule;
}

Region region_rules(const SDNetwork& net, int k, const ActivationPattern& pattern) {
    if (static_cast<int>(pattern.size()) != net.hidden_layers()) {
        throw ContractViolation("region_rules: pattern depth differs from network");
    }
    for (int h = 0; h < net.hidden_layers(); ++h) {
        const auto& d = pattern[h];
        if ((d.active && (*d.active < 0 || *d.active >= net.group_count[h])) ||
            (d.inactive && (*d.inactive < 0 || *d.inactive >= net.group_count[h])) ||
            (d.active && d.inactive && *d.active == *d.inactive)) {
            throw ContractViolation("region_rules: invalid pattern " + to_string(pattern));
        }
    }
    Region region;
    region.class_label = k;
    region.pattern = pattern;
    region.key = pattern_number(pattern, net.group_count);

    RuleConjunction rules = map_out(k, net.output_layer());
    for (int h = net.hidden_layers() - 1; h >= 0; --h) {
        RuleConjunction lower;
        lower.layer = net.layers[h].source_layer;
        for (const auto& term : rules.terms) {
            lower.add(inherit_rule(term, pattern[h], net.group_size[h], net.layers[h], net.alpha));
        }
        lower.append(door_constraints(pattern[h], net.group_size[h], net.layers[h]));
        rules = std::move(lower);
    }
    region.explicit_rules = std::move(rules);

    for (int h = 0; h < net.hidden_layers(); ++h) {
        auto layer_rules = implicit_constraints(pattern[h], net.group_size[h], net.group_count[h],
                                                net.layers[h], h);
        for (auto& c : layer_rules) {
            for (auto& clause : c.disjuncts.clauses) {
                for (auto& t : clause.terms) t = pull_back(net, pattern, h, std::move(t));
                clause.layer = 0;
            }
            c.disjuncts.layer = 0;
            region.implicit_rules.constraints.push_back(std::move(c));
        }
    }

    region.box = bounding_box(region.explicit_rules, net.input_bounds);
    region.populated = region.box.has_value();
    return region;
}

void RegionIndex::insert(Region region) {
    RegionKey key{region.class_label, region.key};
    const auto [it, inserted] = map_.try_emplace(key, std::move(region));
    if (!inserted) {
        throw ContractViolation("region index: duplicate key (class " +
                                std::to_string(key.class_label) + ", pattern " +
                                std::to_string(key.pattern.number) + ")");
    }
}

const Region* RegionIndex::find(const RegionKey& key) const {
    const auto it = map_.find(key);
    return it == map_.end() ? nullptr : &it->second;
}

RegionIndex build_region_index(std::vector<Region> regions) {
    RegionIndex index;
    for (auto& r : regions) index.insert(std::move(r));
    return index;
}

int ReluNetwork::hidden_neurons() const {
    int total = 0;
    for (std::size_t l = 0; l + 1 < layers.size(); ++l) total += static_cast<int>(layers[l].out_dim());
    return total;
}

RuleDNF dnn_map_reference(const ReluNetwork& net, int k) {
    if (net.layers.empty()) throw ContractViolation("dnn_map_reference: empty network");
    const int neurons = net.hidden_neurons();
    if (neurons > kReluMapperNeuronCap) {
        throw std::invalid_argument(
            "dnn_map_reference: " + std::to_string(neurons) + " hidden neurons exceed the cap of " +
            std::to_string(kReluMapperNeuronCap) +
            "; exhaustive ReLU pattern enumeration grows as 2^neurons");
    }
    const std::size_t hidden = net.layers.size() - 1;
    RuleDNF dnf;
    dnf.layer = 0;
    const std::uint64_t total = std::uint64_t{1} << neurons;
    for (std::uint64_t bits = 0; bits < total; ++bits) {
        // Bit n of `bits` is the state of hidden neuron n, counted from the
        // first hidden layer; a set bit means active.
        std::vector<Vector> masks(hidden);
        int offset = 0;
        for (std::size_t h = 0; h < hidden; ++h) {
            const auto width = net.layers[h].out_dim();
            masks[h].resize(width);
            for (Eigen::Index i = 0; i < width; ++i) {
                masks[h][i] = ((bits >> (offset + i)) & 1u) ? 1.0 : 0.0;
            }
            offset += static_cast<int>(width);
        }
        RuleConjunction rules = map_out(k, net.layers.back());
        for (std::size_t h = hidden; h-- > 0;) {
            const auto& map = net.layers[h];
            RuleConjunction lower;
            lower.layer = map.source_layer;
            for (const auto& term : rules.terms) lower.add(substitute_affine(term, map, masks[h]));
            for (Eigen::Index i = 0; i < map.out_dim(); ++i) {
                lower.add(LinearInequality::make(map.source_layer, map.weights.row(i).transpose(),
                                                 map.biases[i],
                                                 masks[h][i] > 0 ? Relation::Greater : Relation::Less)
                              .normalized());
            }
            rules = std::move(lower);
        }
        dnf.clauses.push_back(std::move(rules));
    }
    return dnf;
}

}  // namespace sdnv
