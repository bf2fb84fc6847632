#include "sdnv/serialize.hpp"

#include "sdnv/data.hpp"

#include <fstream>

namespace sdnv {

json to_json(const Vector& v) { return std::vector<double>(v.begin(), v.end()); }

Vector vector_from_json(const json& j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(values.data(), Eigen::Index(values.size()));
}

json to_json(const LinearInequality& ineq) {
    return {{"layer", ineq.layer}, {"coeffs", to_json(ineq.coeffs)}, {"offset", ineq.offset}};
}

LinearInequality inequality_from_json(const json& j) {
    return LinearInequality(j.at("layer").get<int>(), vector_from_json(j.at("coeffs")),
                            j.at("offset").get<double>());
}

json to_json(const RuleConjunction& rules) {
    json terms = json::array();
    for (const auto& t : rules.terms) terms.push_back(to_json(t));
    return {{"layer", rules.layer}, {"terms", std::move(terms)}};
}

RuleConjunction conjunction_from_json(const json& j) {
    RuleConjunction out;
    out.layer = j.at("layer").get<int>();
    for (const auto& t : j.at("terms")) out.add(inequality_from_json(t));
    return out;
}

json to_json(const RuleDNF& dnf) {
    json clauses = json::array();
    for (const auto& c : dnf.clauses) clauses.push_back(to_json(c));
    return {{"layer", dnf.layer}, {"clauses", std::move(clauses)}};
}

RuleDNF dnf_from_json(const json& j) {
    RuleDNF out;
    out.layer = j.at("layer").get<int>();
    for (const auto& c : j.at("clauses")) out.clauses.push_back(conjunction_from_json(c));
    return out;
}

json to_json(const Box& box) {
    return {{"lower", to_json(box.lower)}, {"upper", to_json(box.upper)}};
}

Box box_from_json(const json& j) {
    return Box(vector_from_json(j.at("lower")), vector_from_json(j.at("upper")));
}

json pattern_to_json(const ActivationPattern& pattern) {
    json out = json::array();
    for (const auto& d : pattern) {
        out.push_back({d.active ? json(*d.active) : json(nullptr),
                       d.inactive ? json(*d.inactive) : json(nullptr)});
    }
    return out;
}

ActivationPattern pattern_from_json(const json& j) {
    ActivationPattern out;
    for (const auto& layer : j) {
        DoorAssignment d;
        if (!layer.at(0).is_null()) d.active = layer.at(0).get<int>();
        if (!layer.at(1).is_null()) d.inactive = layer.at(1).get<int>();
        out.push_back(d);
    }
    return out;
}

json to_json(const SDNetwork& net, const json& config) {
    json layers = json::array();
    for (const auto& l : net.layers) {
        json rows = json::array();
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r) rows.push_back(to_json(l.weights.row(r).transpose()));
        layers.push_back({{"weights", std::move(rows)}, {"biases", to_json(l.biases)}});
    }
    return {{"format", "sdnv-model-v1"},
            {"tool_version", kToolVersion},
            {"alpha", net.alpha},
            {"group_size", net.group_size},
            {"group_count", net.group_count},
            {"classes", net.classes},
            {"input_bounds", to_json(net.input_bounds)},
            {"layers", std::move(layers)},
            {"config", config}};
}

SDNetwork network_from_json(const json& j) {
    SDNetwork net;
    net.alpha = j.at("alpha").get<double>();
    net.group_size = j.at("group_size").get<std::vector<int>>();
    net.group_count = j.at("group_count").get<std::vector<int>>();
    net.classes = j.at("classes").get<int>();
    net.input_bounds = box_from_json(j.at("input_bounds"));
    int index = 0;
    for (const auto& l : j.at("layers")) {
        const auto& rows = l.at("weights");
        const Eigen::Index out_dim = Eigen::Index(rows.size());
        const Eigen::Index in_dim = out_dim ? Eigen::Index(rows.at(0).size()) : 0;
        Matrix w(out_dim, in_dim);
        for (Eigen::Index r = 0; r < out_dim; ++r) {
            const Vector row = vector_from_json(rows.at(static_cast<std::size_t>(r)));
            if (row.size() != in_dim) throw ParseError("ragged weight matrix in model", 0);
            w.row(r) = row.transpose();
        }
        net.layers.emplace_back(std::move(w), vector_from_json(l.at("biases")), index, index + 1);
        ++index;
    }
    try {
        net.validate();
    } catch (const ContractViolation& e) {
        throw ParseError(std::string("inconsistent model: ") + e.what(), 0);
    }
    return net;
}

json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what(), e.byte);
    }
}

void save_json(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(1) << '\n';
}

void save_model(const std::filesystem::path& path, const SDNetwork& net, const json& config) {
    save_json(path, to_json(net, config));
}

SDNetwork load_model(const std::filesystem::path& path) { return network_from_json(load_json(path)); }

json to_json(const Region& region) {
    json explicit_rules = json::array();
    for (const auto& t : region.explicit_rules.terms) explicit_rules.push_back(to_json(t));
    json implicit = json::array();
    json groups = json::array();
    for (const auto& c : region.implicit_rules.constraints) {
        json disjuncts = json::array();
        for (const auto& clause : c.disjuncts.clauses) {
            for (const auto& t : clause.terms) disjuncts.push_back(to_json(t));
        }
        implicit.push_back(std::move(disjuncts));
        groups.push_back({{"layer", c.layer}, {"group", c.group}, {"sign", c.negative ? "<0" : ">0"}});
    }
    return {{"class", region.class_label},
            {"pattern", pattern_to_json(region.pattern)},
            {"pattern_text", to_string(region.pattern)},
            {"key", region.key.number},
            {"explicit", std::move(explicit_rules)},
            {"implicit", std::move(implicit)},
            {"implicit_groups", std::move(groups)},
            {"box", region.box ? to_json(*region.box) : json(nullptr)},
            {"populated", region.populated}};
}

Region region_from_json(const json& j) {
    Region r;
    r.class_label = j.at("class").get<int>();
    r.pattern = pattern_from_json(j.at("pattern"));
    r.key.number = j.at("key").get<std::uint64_t>();
    r.explicit_rules.layer = 0;
    for (const auto& t : j.at("explicit")) r.explicit_rules.add(inequality_from_json(t));
    const auto& implicit = j.at("implicit");
    const auto& groups = j.at("implicit_groups");
    if (implicit.size() != groups.size()) throw ParseError("implicit rule metadata mismatch", 0);
    for (std::size_t i = 0; i < implicit.size(); ++i) {
        ImplicitConstraint c;
        c.layer = groups[i].at("layer").get<int>();
        c.group = groups[i].at("group").get<int>();
        c.negative = groups[i].at("sign").get<std::string>() == "<0";
        c.disjuncts.layer = 0;
        for (const auto& t : implicit[i]) {
            RuleConjunction single;
            single.add(inequality_from_json(t));
            c.disjuncts.clauses.push_back(std::move(single));
        }
        r.implicit_rules.constraints.push_back(std::move(c));
    }
    if (!j.at("box").is_null()) r.box = box_from_json(j.at("box"));
    r.populated = j.value("populated", r.box.has_value());
    return r;
}

json rules_to_json(const SDNetwork& net, const RegionIndex& index, const json& config) {
    json regions = json::array();
    for (const auto& [key, region] : index) regions.push_back(to_json(region));
    json universe = nullptr;
    try {
        universe = pattern_universe_size(net.group_count);
    } catch (const std::overflow_error&) {
    }
    return {{"format", "sdnv-rules-v1"},
            {"tool_version", kToolVersion},
            {"classes", net.classes},
            {"group_count", net.group_count},
            {"patterns_per_class", universe},
            {"regions", std::move(regions)},
            {"config", config}};
}

RegionIndex rules_from_json(const json& j) {
    RegionIndex index;
    for (const auto& r : j.at("regions")) index.insert(region_from_json(r));
    return index;
}

LimitingBall ball_from_json(const json& j) {
    LimitingBall b;
    b.center = vector_from_json(j.at("center"));
    b.radius = j.at("radius").get<double>();
    b.volume_estimate = j.value("volume_estimate", 0.0);
    b.sample_count = j.value("sample_count", std::size_t{0});
    return b;
}

json to_json(const Finding& f) {
    return {{"kind", to_string(f.kind)},
            {"class", f.class_label},
            {"component", f.component},
            {"vertices", f.vertices},
            {"ball", to_json(f.ball)},
            {"evidence", f.evidence}};
}

Finding finding_from_json(const json& j) {
    Finding f;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == to_string(FindingKind::SmallIsolated)) {
        f.kind = FindingKind::SmallIsolated;
    } else if (kind == to_string(FindingKind::Protruding)) {
        f.kind = FindingKind::Protruding;
    } else {
        throw ParseError("unknown finding kind '" + kind + "'", 0);
    }
    f.class_label = j.at("class").get<int>();
    f.component = j.at("component").get<std::size_t>();
    f.vertices = j.at("vertices").get<std::vector<std::size_t>>();
    f.ball = ball_from_json(j.at("ball"));
    f.evidence = j.at("evidence").get<double>();
    return f;
}

json to_json(const LimitingBall& ball) {
    return {{"center", to_json(ball.center)},
            {"radius", ball.radius},
            {"volume_estimate", ball.volume_estimate},
            {"sample_count", ball.sample_count}};
}

namespace {

json budgets_json(const Budgets& b) {
    return {{"discover_samples", b.discover_samples},
            {"region_samples", b.region_samples},
            {"probes_per_boundary", b.probes_per_boundary},
            {"ball_samples", b.ball_samples},
            {"max_vertices", b.max_vertices}};
}

}  // namespace

json to_json(const VerificationReport& report, const json& config) {
    const auto& g = report.graph;
    json vertices = json::array();
    for (std::size_t v = 0; v < g.vertices.size(); ++v) {
        const auto& vx = g.vertices[v];
        json entry = {{"id", v},
                      {"class", vx.region.class_label},
                      {"pattern", pattern_to_json(vx.region.pattern)},
                      {"pattern_text", to_string(vx.region.pattern)},
                      {"key", vx.region.key.number},
                      {"component", g.component_of.empty() ? 0 : g.component_of[v]},
                      {"explicit_rules", vx.region.explicit_rules.terms.size()},
                      {"draws", vx.samples.draws},
                      {"accepted", vx.samples.points.size()},
                      {"acceptance_ratio", vx.samples.acceptance_ratio},
                      {"volume_estimate", vx.samples.volume_estimate},
                      {"thin", vx.samples.thin},
                      {"witness", to_json(vx.witness)}};
        if (v < report.vertex_balls.size() && report.vertex_balls[v]) {
            entry["ball"] = to_json(*report.vertex_balls[v]);
        } else {
            entry["ball"] = nullptr;
        }
        vertices.push_back(std::move(entry));
    }
    json edges = json::array();
    for (const auto& [i, j] : g.edges) edges.push_back({i, j});
    json components = json::array();
    for (std::size_t c = 0; c < g.components.size(); ++c) {
        json entry = {{"id", c},
                      {"class", g.vertices[g.components[c].front()].region.class_label},
                      {"vertices", g.components[c]}};
        if (c < report.component_balls.size() && report.component_balls[c]) {
            entry["ball"] = to_json(*report.component_balls[c]);
        } else {
            entry["ball"] = nullptr;
        }
        components.push_back(std::move(entry));
    }
    json findings = json::array();
    for (const auto& f : report.findings) findings.push_back(to_json(f));
    std::map<int, std::size_t> per_class;
    for (const auto& comp : g.components) ++per_class[g.vertices[comp.front()].region.class_label];
    json class_components = json::object();
    for (const auto& [cls, count] : per_class) class_components[std::to_string(cls)] = count;

    return {{"format", "sdnv-report-v1"},
            {"tool_version", kToolVersion},
            {"params", {{"R", report.params.R}, {"r", report.params.r}}},
            {"budgets", budgets_json(report.params.budgets)},
            {"seed", report.params.seed},
            {"vertices", std::move(vertices)},
            {"edges", std::move(edges)},
            {"components", std::move(components)},
            {"components_per_class", std::move(class_components)},
            {"findings", std::move(findings)},
            {"verdict", report.verdict()},
            {"complete", report.complete},
            {"warnings", report.warnings},
            {"config", config}};
}

}  // namespace sdnv
