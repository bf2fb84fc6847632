#pragma once

// Region-based global robustness verification.
//
// Pipeline: discover the populated (class, pattern) regions, sample each one
// inside its rule bounding box, connect regions that share a boundary,
// group same-class regions into connected components, fit limiting balls and
// flag small isolated components and protruding regions.

#include "sdnv/parallel.hpp"
#include "sdnv/rulemap.hpp"
#include "sdnv/sdn.hpp"

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace sdnv {

struct Budgets {
    std::size_t discover_samples = 4096;     // uniform draws over the input box
    std::size_t region_samples = 4096;       // rejection draws per region
    std::size_t probes_per_boundary = 64;    // boundary probes per explicit rule
    std::size_t ball_samples = 4096;         // draws per limiting ball
    std::size_t max_vertices = 200000;       // graph growth cap
};

struct RegionSamples {
    std::vector<Vector> points;  // accepted draws
    std::size_t draws = 0;
    double acceptance_ratio = 0.0;
    double volume_estimate = 0.0;
    bool thin = false;  // nothing accepted
};

/// Rejection sampling in the region's bounding box. A draw is accepted when
/// its forward pass realizes the region's class and pattern.
RegionSamples sample_region(const SDNetwork& net, const Region& region, std::size_t draws, Rng& rng);

/// A graph vertex: a region observed non-empty, plus its sample statistics.
struct Vertex {
    Region region;
    Vector witness;  // a point known to realize the region
    RegionSamples samples;
    RegionKey key() const { return {region.class_label, region.key}; }
};

/// Populated regions found by forwarding the dataset (if any) and uniform
/// draws over the input box. Sorted by (class, serial number).
std::vector<Vertex> discover_populated_regions(const SDNetwork& net, const Dataset* data,
                                               std::size_t uniform_draws, Rng& rng);

struct BoundaryCrossing {
    int class_label = 0;
    ActivationPattern pattern;
    Vector hit;        // point on the boundary hyperplane
    Vector far_point;  // hit stepped across the boundary
};

enum class ProbeOutcome {
    Crossed,
    MissedFacet,       // another boundary of the region is hit first or lies within the step
    LeftInputBox,      // the crossing point is outside the input bounds
    NotInRegion,       // the near-side point does not realize the region
    SameRegion,        // the far side still realizes the region
};

struct ProbeResult {
    ProbeOutcome outcome = ProbeOutcome::MissedFacet;
    std::optional<BoundaryCrossing> crossing;
};

/// Walks from `interior` along `direction` (default: against the rule's
/// normal) to the hyperplane of explicit rule `rule_index`, checks that no
/// other explicit boundary lies within `step` of the hit, and classifies the
/// points `step` inside and outside.
ProbeResult boundary_cross(const SDNetwork& net, const Region& region, std::size_t rule_index,
                           const Vector& interior, const std::optional<Vector>& direction,
                           double step);

/// Probe step: 1e-6 times the input box diameter.
double default_probe_step(const Box& input_bounds);

struct GraphOptions {
    Budgets budgets;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

struct ClassificationGraph {
    std::vector<Vertex> vertices;
    std::set<std::pair<std::size_t, std::size_t>> edges;  // (i, j) with i < j
    /// Same-class connected components; members listed ascending.
    std::vector<std::vector<std::size_t>> components;
    std::vector<std::size_t> component_of;
    bool complete = true;
    std::vector<std::string> warnings;

    std::size_t find_vertex(const RegionKey& key) const;  // npos if absent
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

/// Probes every explicit boundary of every vertex. Neighbors found across a
/// boundary that are not yet vertices are added (and probed in turn) until
/// budgets.max_vertices is reached; then `complete` is false.
ClassificationGraph build_graph(const SDNetwork& net, std::vector<Vertex> vertices,
                                const GraphOptions& options);

/// Recomputes per-class components of `graph` from its edges.
void compute_components(ClassificationGraph& graph);

struct LimitingBall {
    Vector center;
    double radius = 0.0;
    double volume_estimate = 0.0;
    std::size_t sample_count = 0;
};

/// Ball of a vertex set: volume-weighted center of the member sample means,
/// radius the largest L-infinity distance from it to any accepted sample.
/// Thin members are skipped; nullopt when every member is thin.
std::optional<LimitingBall> limiting_ball(const std::vector<const RegionSamples*>& members);

bool detect_small_isolated(const LimitingBall& ball, double R);

struct ProtrudingEvidence {
    bool protruding = false;
    std::size_t same_class = 0;  // m
    std::size_t draws = 0;       // n
    double fraction() const { return draws ? double(same_class) / double(draws) : 0.0; }
};

/// Draws n points uniformly in the ball (clipped to the input box) and counts
/// those classified as `class_label`. Protruding when m/n < r.
ProtrudingEvidence detect_protruding(const SDNetwork& net, int class_label, const LimitingBall& ball,
                                     double r, std::size_t n, Rng& rng);

enum class FindingKind { SmallIsolated, Protruding };
std::string to_string(FindingKind kind);

struct Finding {
    FindingKind kind = FindingKind::Protruding;
    int class_label = 0;
    std::size_t component = 0;
    std::vector<std::size_t> vertices;
    LimitingBall ball;
    double evidence = 0.0;  // m/n for protruding; ball radius / R for small isolated
};

struct VerifyParams {
    double R = 0.04;
    double r = 0.2;
    Budgets budgets;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

struct VerificationReport {
    VerifyParams params;
    ClassificationGraph graph;
    std::vector<std::optional<LimitingBall>> vertex_balls;
    std::vector<std::optional<LimitingBall>> component_balls;
    std::vector<Finding> findings;
    bool complete = true;
    std::vector<std::string> warnings;

    bool globally_robust() const { return findings.empty(); }
    std::string verdict() const {
        return globally_robust() ? "globally_robust" : "not_globally_robust";
    }
    /// Vertices named by any finding, ascending.
    std::vector<std::size_t> adversarial_vertices() const;
};

/// Full pipeline; deterministic given params.seed (independent of threads).
VerificationReport verify_global(const SDNetwork& net, const Dataset* data,
                                 const VerifyParams& params);

/// Detection step only, on an already built graph. Re-running with other R/r
/// reuses the same random streams.
void detect_adversarial_regions(const SDNetwork& net, VerificationReport& report);

/// Up to `count` points of the region, each forward-classified into it.
std::vector<Vector> extract_adversarial_examples(const SDNetwork& net, const Region& region,
                                                 std::size_t count, std::uint64_t seed);

}  // namespace sdnv
