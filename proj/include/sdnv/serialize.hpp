#pragma once

// JSON forms of rules, networks, regions and verification reports.

#include "sdnv/rgrv.hpp"
#include "sdnv/rulemap.hpp"
#include "sdnv/sdn.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace sdnv {

using json = nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";

json to_json(const Vector& v);
Vector vector_from_json(const json& j);

json to_json(const LinearInequality& ineq);
LinearInequality inequality_from_json(const json& j);

/// {layer, terms:[ineq...]}
json to_json(const RuleConjunction& rules);
RuleConjunction conjunction_from_json(const json& j);

/// {layer, clauses:[conjunction...]}
json to_json(const RuleDNF& dnf);
RuleDNF dnf_from_json(const json& j);

json to_json(const Box& box);
Box box_from_json(const json& j);

/// [[g, g'], ...] with null for an absent door.
json pattern_to_json(const ActivationPattern& pattern);
ActivationPattern pattern_from_json(const json& j);

/// {format, tool_version, alpha, group_size, group_count, classes,
///  input_bounds, layers:[{weights, biases}], config}
json to_json(const SDNetwork& net, const json& config = json::object());
SDNetwork network_from_json(const json& j);

void save_model(const std::filesystem::path& path, const SDNetwork& net,
                const json& config = json::object());
SDNetwork load_model(const std::filesystem::path& path);
json load_json(const std::filesystem::path& path);
void save_json(const std::filesystem::path& path, const json& j);

/// {class, pattern, pattern_text, key, explicit, implicit, implicit_groups, box, populated}
json to_json(const Region& region);
Region region_from_json(const json& j);

/// {format, tool_version, classes, group_count, regions:[region...], config}
json rules_to_json(const SDNetwork& net, const RegionIndex& index, const json& config = json::object());
RegionIndex rules_from_json(const json& j);

json to_json(const LimitingBall& ball);
LimitingBall ball_from_json(const json& j);

json to_json(const Finding& finding);
Finding finding_from_json(const json& j);

/// {params, budgets, seed, vertices, edges, components, findings, verdict,
///  complete, warnings, tool_version, config}
json to_json(const VerificationReport& report, const json& config = json::object());

}  // namespace sdnv
