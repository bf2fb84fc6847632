#include "sdnv/rgrv.hpp"

#include "support.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace sdnv;
using namespace sdnv::testing;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

const Vertex* vertex_of(const std::vector<Vertex>& vs, const RegionKey& key) {
    for (const auto& v : vs) {
        if (v.key() == key) return &v;
    }
    return nullptr;
}

RegionSamples uniform_square(double lo, double hi, std::size_t n, Rng& rng) {
    std::uniform_real_distribution<double> u(lo, hi);
    RegionSamples s;
    for (std::size_t i = 0; i < n; ++i) s.points.push_back(vec({u(rng), u(rng)}));
    s.draws = n;
    s.acceptance_ratio = 1.0;
    s.volume_estimate = (hi - lo) * (hi - lo);
    return s;
}

const SDNetwork& blob_net() {
    static const SDNetwork net = synth_net(1);
    return net;
}

}  // namespace

TEST_CASE("half-space region volume and ball") {
    const SDNetwork net = half_space_net();
    Rng rng(1);
    auto vertices = discover_populated_regions(net, nullptr, 1000, rng);
    REQUIRE(vertices.size() == 2);
    const Vertex* right = vertex_of(vertices, region_of(net, vec({0.9, 0.5})));
    REQUIRE(right);
    const auto s = sample_region(net, right->region, 4096, rng);
    const double sigma = std::sqrt(0.25 / 4096.0);
    CHECK(std::abs(s.volume_estimate - 0.5) <= 3 * sigma);
    const auto ball = limiting_ball({&s});
    REQUIRE(ball);
    CHECK(ball->center[0] == Catch::Approx(0.75).margin(0.01));
    CHECK(ball->center[1] == Catch::Approx(0.5).margin(0.01));
    CHECK(std::abs(ball->radius - 0.5) <= 0.02 * 0.5);
    for (const auto& p : s.points) CHECK((p - ball->center).lpNorm<Eigen::Infinity>() <= ball->radius);
}

TEST_CASE("acceptance ratio of a diagonal half-space") {
    // Class 0 where x0 + x1 > 1; the rule's bounding box is the whole unit box.
    SDNetwork net = half_space_net();
    net.layers[0].weights << 1, 1, -1, -1;
    net.layers[0].biases << -1, 1;
    Rng rng(2);
    const auto vertices = discover_populated_regions(net, nullptr, 1000, rng);
    const Vertex* upper = vertex_of(vertices, region_of(net, vec({0.9, 0.9})));
    REQUIRE(upper);
    REQUIRE(upper->region.box);
    CHECK(upper->region.box->volume() == Catch::Approx(1.0).margin(1e-6));
    const auto s = sample_region(net, upper->region, 4096, rng);
    CHECK(std::abs(s.acceptance_ratio - 0.5) <= 3 * std::sqrt(0.25 / 4096.0));
}

TEST_CASE("a region covering the whole box accepts every draw") {
    SDNetwork net = half_space_net();
    for (auto& l : net.layers) {
        l.weights.setZero();
        l.biases.setZero();
    }
    Rng rng(3);
    const auto vertices = discover_populated_regions(net, nullptr, 500, rng);
    REQUIRE(vertices.size() == 1);
    const auto s = sample_region(net, vertices[0].region, 500, rng);
    CHECK(s.acceptance_ratio == 1.0);
    GraphOptions opt;
    const auto g = build_graph(net, vertices, opt);
    CHECK(g.edges.empty());
    CHECK(g.components.size() == 1);
}

TEST_CASE("ball of a square and of two equal squares") {
    Rng rng(4);
    const auto a = uniform_square(0, 1, 4096, rng);
    const auto ball = limiting_ball({&a});
    REQUIRE(ball);
    CHECK(ball->center[0] == Catch::Approx(0.5).margin(0.02));
    CHECK(ball->center[1] == Catch::Approx(0.5).margin(0.02));
    CHECK(ball->radius == Catch::Approx(0.5).margin(0.02));

    const auto b = uniform_square(2, 3, 4096, rng);
    const auto both = limiting_ball({&a, &b});
    REQUIRE(both);
    CHECK(both->center[0] == Catch::Approx(1.5).margin(0.02));
    CHECK(both->center[1] == Catch::Approx(1.5).margin(0.02));
    CHECK(both->volume_estimate == Catch::Approx(2.0));

    RegionSamples thin;
    thin.thin = true;
    CHECK_FALSE(limiting_ball({&thin}).has_value());
}

TEST_CASE("small isolated threshold is strict") {
    LimitingBall b;
    b.radius = 0.03;
    CHECK(detect_small_isolated(b, 0.04));
    b.radius = 0.04;
    CHECK_FALSE(detect_small_isolated(b, 0.04));
    b.radius = 0.5;
    CHECK_FALSE(detect_small_isolated(b, 0.04));
}

TEST_CASE("protruding detection compares m/n with r") {
    const SDNetwork net = half_space_net();
    Rng rng(5);
    LimitingBall full;
    full.center = vec({0.75, 0.5});
    full.radius = 0.2;
    const auto filled = detect_protruding(net, 0, full, 0.2, 4096, rng);
    CHECK(filled.fraction() == 1.0);
    CHECK_FALSE(filled.protruding);

    // Ball [0.41, 0.51] x [0.45, 0.55]: a tenth of it lies right of 0.5.
    LimitingBall sliver;
    sliver.center = vec({0.46, 0.5});
    sliver.radius = 0.05;
    const auto ev = detect_protruding(net, 0, sliver, 0.2, 4096, rng);
    CHECK(ev.fraction() == Catch::Approx(0.1).margin(0.03));
    CHECK(ev.protruding);
}

TEST_CASE("crossing between the two half-spaces") {
    const SDNetwork net = half_space_net();
    const RegionKey right = region_of(net, vec({0.75, 0.5}));
    const RegionKey left = region_of(net, vec({0.25, 0.5}));
    REQUIRE(right.class_label == 0);
    REQUIRE(left.class_label == 1);
    const Region r = region_rules(net, 0, forward(net, vec({0.75, 0.5})).pattern);
    bool crossed = false;
    for (std::size_t i = 0; i < r.explicit_rules.terms.size(); ++i) {
        const auto res = boundary_cross(net, r, i, vec({0.75, 0.5}), std::nullopt,
                                        default_probe_step(net.input_bounds));
        if (res.outcome != ProbeOutcome::Crossed) continue;
        crossed = true;
        CHECK(res.crossing->class_label == 1);
        CHECK(pattern_number(res.crossing->pattern, net.group_count) == left.pattern);
        CHECK(res.crossing->hit[0] == Catch::Approx(0.5));
    }
    CHECK(crossed);
    CHECK(default_probe_step(net.input_bounds) == Catch::Approx(1e-6));
}

TEST_CASE("crossing the class boundary of the warm-up SDN keeps the pattern") {
    // Active door on x1, x0 copied: logits (2 x1, x0), class boundary 2 x1 = x0.
    const SDNetwork net = warmup_sdn();
    const Vector inside = vec({1.5, 1.0});
    const auto fr = forward(net, inside);
    REQUIRE(fr.predicted() == 0);
    const Region r = region_rules(net, 0, fr.pattern);
    std::size_t face = r.explicit_rules.terms.size();
    for (std::size_t i = 0; i < r.explicit_rules.terms.size(); ++i) {
        const auto& t = r.explicit_rules.terms[i];
        if (t.coeffs[0] < 0 && t.coeffs[1] > 0) face = i;
    }
    REQUIRE(face < r.explicit_rules.terms.size());
    const auto res = boundary_cross(net, r, face, inside, std::nullopt, 1e-6);
    REQUIRE(res.outcome == ProbeOutcome::Crossed);
    CHECK(res.crossing->class_label == 1);
    CHECK(res.crossing->pattern == fr.pattern);
}

TEST_CASE("warm-up SDN regions and graph match the oracles") {
    const SDNetwork net = warmup_sdn();
    Rng rng(6);
    auto vertices = discover_populated_regions(net, nullptr, 4096, rng);
    const GridOracle grid = grid_oracle(net, 200);
    std::set<RegionKey> found;
    for (const auto& v : vertices) found.insert(v.key());
    CHECK(found == grid.regions);

    GraphOptions opt;
    opt.seed = 1;
    const auto g = build_graph(net, std::move(vertices), opt);
    CHECK(graph_edges(g) == arrangement_oracle(net, 500).edges);
}

TEST_CASE("graph of a trained 2D net matches the arrangement oracle") {
    const SDNetwork& net = blob_net();
    Rng rng(7);
    auto vertices = discover_populated_regions(net, nullptr, 4096, rng);
    GraphOptions opt;
    opt.seed = 7;
    const auto g = build_graph(net, std::move(vertices), opt);
    REQUIRE(g.complete);
    const auto oracle = arrangement_oracle(net, 500);
    const auto edges = graph_edges(g);
    std::set<RegionKey> keys;
    for (const auto& v : g.vertices) keys.insert(v.key());
    CHECK(keys == oracle.regions);
    CHECK(edges == oracle.edges);
    for (std::size_t v = 0; v < g.vertices.size(); ++v) {
        const auto& comp = g.components[g.component_of[v]];
        CHECK(std::find(comp.begin(), comp.end(), v) != comp.end());
        for (std::size_t u : comp) CHECK(g.vertices[u].region.class_label == g.vertices[v].region.class_label);
    }
}

TEST_CASE("two half-spaces with generous thresholds are globally robust") {
    const SDNetwork net = half_space_net();
    VerifyParams p;
    p.R = 0.1;
    p.r = 0.2;
    p.seed = 3;
    const auto report = verify_global(net, nullptr, p);
    CHECK(report.graph.vertices.size() == 2);
    CHECK(report.graph.edges.size() == 1);
    CHECK(report.complete);
    CHECK(report.verdict() == "globally_robust");

    // Each class fills about two thirds of its clipped ball.
    p.r = 0.8;
    const auto strict = verify_global(net, nullptr, p);
    CHECK(strict.findings.size() == 2);
    CHECK(strict.verdict() == "not_globally_robust");
}

TEST_CASE("planted blob is reported, deterministically") {
    const SDNetwork& net = blob_net();
    const Dataset data = synth_data(1);
    VerifyParams p;
    p.R = 0.15;
    p.r = 0.2;
    p.seed = 11;
    const auto report = verify_global(net, &data, p);
    CHECK(report.verdict() == "not_globally_robust");
    bool in_blob = false;
    for (const auto& f : report.findings) {
        if (f.class_label != 0) continue;
        in_blob = in_blob || (f.ball.center - vec({0.15, 0.15})).norm() < 0.06;
    }
    CHECK(in_blob);

    const auto again = verify_global(net, &data, p);
    REQUIRE(again.findings.size() == report.findings.size());
    for (std::size_t i = 0; i < report.findings.size(); ++i) {
        CHECK(again.findings[i].vertices == report.findings[i].vertices);
        CHECK(again.findings[i].ball.center == report.findings[i].ball.center);
        CHECK(again.findings[i].evidence == report.findings[i].evidence);
    }
    CHECK(again.graph.edges == report.graph.edges);

    SECTION("extracted points realize their region") {
        for (std::size_t v : report.adversarial_vertices()) {
            const auto& vx = report.graph.vertices[v];
            const auto pts = extract_adversarial_examples(net, vx.region, 20, 5);
            for (const auto& x : pts) CHECK(region_of(net, x) == vx.key());
        }
        CHECK(extract_adversarial_examples(net, report.graph.vertices[0].region, 0, 5).empty());
    }

    SECTION("volume estimates do not exceed the input box") {
        double total = 0.0, var = 0.0;
        for (const auto& v : report.graph.vertices) {
            total += v.samples.volume_estimate;
            const double p_hat = v.samples.acceptance_ratio;
            const double bv = v.region.box->volume();
            if (v.samples.draws) var += bv * bv * p_hat * (1 - p_hat) / double(v.samples.draws);
        }
        CHECK(total <= net.input_bounds.volume() + 3 * std::sqrt(var) + 1e-12);
    }

    SECTION("larger thresholds never drop a flagged vertex") {
        const auto base = report.adversarial_vertices();
        for (const auto& [R, r] : std::vector<std::pair<double, double>>{{0.2, 0.2}, {0.15, 0.4}, {0.3, 0.5}}) {
            VerificationReport bigger = report;
            bigger.params.R = R;
            bigger.params.r = r;
            detect_adversarial_regions(net, bigger);
            const auto grown = bigger.adversarial_vertices();
            CHECK(std::includes(grown.begin(), grown.end(), base.begin(), base.end()));
        }
    }
}
