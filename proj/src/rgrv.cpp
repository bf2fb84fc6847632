#include "sdnv/rgrv.hpp"

#include "sdnv/union_find.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace sdnv {

namespace {

Vector uniform_in(const Vector& lo, const Vector& hi, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Vector x(lo.size());
    for (Eigen::Index i = 0; i < lo.size(); ++i) x[i] = lo[i] + (hi[i] - lo[i]) * unit(rng);
    return x;
}

bool realizes(const ForwardResult& f, const Region& region) {
    return f.predicted() == region.class_label && f.pattern == region.pattern;
}

double linf(const Vector& a, const Vector& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

RegionSamples sample_region(const SDNetwork& net, const Region& region, std::size_t draws, Rng& rng) {
    RegionSamples out;
    if (!region.box) {
        out.thin = true;
        return out;
    }
    const Box& box = *region.box;
    for (std::size_t t = 0; t < draws; ++t) {
        Vector x = uniform_in(box.lower, box.upper, rng);
        if (realizes(forward(net, x), region)) out.points.push_back(std::move(x));
    }
    out.draws = draws;
    out.acceptance_ratio = draws ? double(out.points.size()) / double(draws) : 0.0;
    out.volume_estimate = out.acceptance_ratio * box.volume();
    out.thin = out.points.empty();
    return out;
}

std::vector<Vertex> discover_populated_regions(const SDNetwork& net, const Dataset* data,
                                               std::size_t uniform_draws, Rng& rng) {
    std::map<std::pair<int, std::uint64_t>, std::pair<ActivationPattern, Vector>> seen;
    auto visit = [&](const Vector& x) {
        ForwardResult f = forward(net, x);
        const int k = f.predicted();
        const PatternKey key = pattern_number(f.pattern, net.group_count);
        seen.try_emplace({k, key.number}, std::move(f.pattern), x);
    };
    if (data) {
        for (Eigen::Index i = 0; i < data->size(); ++i) visit(data->inputs.col(i));
    }
    for (std::size_t t = 0; t < uniform_draws; ++t) {
        visit(uniform_in(net.input_bounds.lower, net.input_bounds.upper, rng));
    }
    std::vector<Vertex> out;
    out.reserve(seen.size());
    for (auto& [key, value] : seen) {
        Vertex v;
        v.region = region_rules(net, key.first, value.first);
        v.witness = std::move(value.second);
        if (!v.region.box) {
            // Rounding can certify a box empty around a realized point; fall
            // back to the point itself so the region stays addressable.
            v.region.box = Box(v.witness, v.witness);
        }
        v.region.populated = true;
        out.push_back(std::move(v));
    }
    return out;
}

double default_probe_step(const Box& input_bounds) { return 1e-6 * input_bounds.diameter(); }

namespace {

bool same_hyperplane(const LinearInequality& a, const LinearInequality& b) {
    const double na = a.coeffs.norm();
    const double nb = b.coeffs.norm();
    if (na == 0.0 || nb == 0.0) return false;
    return (a.coeffs / na - b.coeffs / nb).cwiseAbs().maxCoeff() < 1e-9 &&
           std::abs(a.offset / na - b.offset / nb) < 1e-9;
}

}  // namespace

ProbeResult boundary_cross(const SDNetwork& net, const Region& region, std::size_t rule_index,
                           const Vector& interior, const std::optional<Vector>& direction,
                           double step) {
    const auto& terms = region.explicit_rules.terms;
    if (rule_index >= terms.size()) throw ContractViolation("boundary_cross: rule index");
    const LinearInequality& face = terms[rule_index];
    ProbeResult result;
    if (face.is_constant()) return result;

    const double norm = face.coeffs.norm();
    const Vector normal = face.coeffs / norm;
    const Vector u = direction ? *direction : Vector(-normal);
    const double rate = face.coeffs.dot(u);
    if (!(rate < 0.0)) return result;
    const double level = face.value(interior);
    if (level < 0.0) {
        result.outcome = ProbeOutcome::NotInRegion;
        return result;
    }
    const Vector hit = interior + (level / -rate) * u;

    for (std::size_t j = 0; j < terms.size(); ++j) {
        if (j == rule_index || terms[j].is_constant() || same_hyperplane(terms[j], face)) continue;
        const double dist = terms[j].value(hit) / terms[j].coeffs.norm();
        if (!(dist > 2.0 * step)) return result;
    }

    const Vector inside = hit + step * normal;
    const Vector outside = hit - step * normal;
    if (!net.input_bounds.contains(inside) || !net.input_bounds.contains(outside)) {
        result.outcome = ProbeOutcome::LeftInputBox;
        return result;
    }
    if (!realizes(forward(net, inside), region)) {
        result.outcome = ProbeOutcome::NotInRegion;
        return result;
    }
    ForwardResult far = forward(net, outside);
    if (realizes(far, region)) {
        result.outcome = ProbeOutcome::SameRegion;
        return result;
    }
    result.outcome = ProbeOutcome::Crossed;
    result.crossing = BoundaryCrossing{far.predicted(), std::move(far.pattern), hit, outside};
    return result;
}

std::size_t ClassificationGraph::find_vertex(const RegionKey& key) const {
    const auto it = std::lower_bound(vertices.begin(), vertices.end(), key,
                                     [](const Vertex& v, const RegionKey& k) { return v.key() < k; });
    return (it != vertices.end() && it->key() == key) ? std::size_t(it - vertices.begin()) : npos;
}

namespace {

// Two regions seen on opposite sides of a probed boundary.
struct NeighborHit {
    RegionKey a, b;
    ActivationPattern pattern_a, pattern_b;
    Vector point_a, point_b;
};

std::uint64_t key_seed(std::uint64_t seed, const RegionKey& key, std::uint64_t stage) {
    return derive_seed(derive_seed(seed, stage), static_cast<std::uint64_t>(key.class_label),
                       key.pattern.number);
}

// Regions met while walking, keyed for reuse across walks of one vertex.
class RuleCache {
public:
    explicit RuleCache(const SDNetwork& net) : net_(net) {}

    const Region& get(const RegionKey& key, const ActivationPattern& pattern) {
        auto it = regions_.find(key);
        if (it == regions_.end()) it = regions_.emplace(key, region_rules(net_, key.class_label, pattern)).first;
        return it->second;
    }

private:
    const SDNetwork& net_;
    std::map<RegionKey, Region> regions_;
};

struct Segment {
    double t0 = 0.0, t1 = 0.0;
    RegionKey key;
    ActivationPattern pattern;
    Vector point;  // where the region was observed
};

// Interval of t where base + t*dir stays inside the box; empty when lo > hi.
std::pair<double, double> box_interval(const Box& box, const Vector& base, const Vector& dir) {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < base.size(); ++i) {
        if (dir[i] == 0.0) {
            if (base[i] < box.lower[i] || base[i] > box.upper[i]) return {1.0, 0.0};
            continue;
        }
        double a = (box.lower[i] - base[i]) / dir[i];
        double b = (box.upper[i] - base[i]) / dir[i];
        if (a > b) std::swap(a, b);
        lo = std::max(lo, a);
        hi = std::min(hi, b);
    }
    return {lo, hi};
}

// First t beyond `after` where the region's rules stop holding along the
// line, or +inf.
double region_exit(const Region& region, const Vector& base, const Vector& dir, double after) {
    double exit = std::numeric_limits<double>::infinity();
    for (const auto& term : region.explicit_rules.terms) {
        const double slope = term.coeffs.dot(dir);
        if (slope >= 0.0) continue;
        const double t = -term.value(base) / slope;
        if (t > after) exit = std::min(exit, t);
    }
    // An existential group constraint fails where every disjunct is <= 0.
    for (const auto& c : region.implicit_rules.constraints) {
        double lo = -std::numeric_limits<double>::infinity();
        double hi = std::numeric_limits<double>::infinity();
        for (const auto& clause : c.disjuncts.clauses) {
            for (const auto& term : clause.terms) {
                const double v0 = term.value(base);
                const double slope = term.coeffs.dot(dir);
                if (slope > 0.0) {
                    hi = std::min(hi, -v0 / slope);
                } else if (slope < 0.0) {
                    lo = std::max(lo, -v0 / slope);
                } else if (v0 > 0.0) {
                    hi = -std::numeric_limits<double>::infinity();
                }
            }
        }
        if (lo <= hi && hi > after) {
            const double t = std::max(lo, after);
            if (t > after) exit = std::min(exit, t);
        }
    }
    return exit;
}

// Splits [lo, hi] of the line base + t*dir into runs of constant region.
// Each run is found by a forward pass just past its start and ends where
// that region's own rules end. Runs shorter than eta can be skipped.
std::vector<Segment> walk_line(const SDNetwork& net, RuleCache& cache, const Vector& base,
                               const Vector& dir, double lo, double hi, double eta,
                               std::size_t max_segments) {
    std::vector<Segment> out;
    double t = lo;
    while (t + eta < hi && out.size() < max_segments) {
        Vector x = base + (t + eta) * dir;
        ForwardResult f = forward(net, x);
        RegionKey key{f.predicted(), pattern_number(f.pattern, net.group_count)};
        const Region& region = cache.get(key, f.pattern);
        const double end = std::min(hi, region_exit(region, base, dir, t + eta));
        if (!out.empty() && out.back().key == key) {
            out.back().t1 = end;
        } else {
            out.push_back({t, end, key, std::move(f.pattern), std::move(x)});
        }
        t = end;
    }
    return out;
}

// Walks both sides of every explicit boundary of one vertex along lines in
// the boundary hyperplane, restricted to the part of the hyperplane where the
// vertex's other explicit rules hold. Opposite runs of different regions that
// overlap by more than min_overlap witness an edge.
std::vector<NeighborHit> probe_vertex(const SDNetwork& net, const Vertex& v, std::size_t probes,
                                      Rng& rng) {
    const double diam = net.input_bounds.diameter();
    const double offset = 1e-9 * diam;
    const double eta = 1e-9 * diam;
    const double min_overlap = 1e-7 * diam;
    constexpr std::size_t kMaxSegments = 4096;

    std::vector<NeighborHit> hits;
    std::set<std::pair<RegionKey, RegionKey>> seen;
    RuleCache cache(net);
    std::vector<Vector> interior = v.samples.points;
    interior.push_back(v.witness);
    const auto& terms = v.region.explicit_rules.terms;
    const Eigen::Index dim = net.input_dim();
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    for (std::size_t f = 0; f < terms.size(); ++f) {
        if (terms[f].is_constant()) continue;
        bool duplicate = false;
        for (std::size_t g = 0; g < f && !duplicate; ++g) duplicate = same_hyperplane(terms[g], terms[f]);
        if (duplicate) continue;

        const double norm = terms[f].coeffs.norm();
        const Vector normal = terms[f].coeffs / norm;
        std::vector<std::size_t> order(interior.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::vector<double> dist(interior.size());
        for (std::size_t i = 0; i < interior.size(); ++i) dist[i] = terms[f].value(interior[i]) / norm;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });

        // A line hyperplane (2D input) is covered by a single walk.
        const std::size_t walks = dim == 2 ? std::min<std::size_t>(probes, 1) : probes;
        for (std::size_t p = 0; p < walks; ++p) {
            const std::size_t pick = p < (walks + 1) / 2
                                         ? order[p % order.size()]
                                         : std::min(interior.size() - 1,
                                                    std::size_t(unit(rng) * double(interior.size())));
            const Vector base = interior[pick] - dist[pick] * normal;
            Vector dir(dim);
            for (Eigen::Index i = 0; i < dim; ++i) dir[i] = gauss(rng);
            dir -= dir.dot(normal) * normal;
            if (dir.norm() < 1e-12) continue;
            dir.normalize();

            // Facet interval from the other explicit rules.
            double lo = -std::numeric_limits<double>::infinity();
            double hi = std::numeric_limits<double>::infinity();
            for (std::size_t r = 0; r < terms.size() && lo < hi; ++r) {
                if (r == f || same_hyperplane(terms[r], terms[f])) continue;
                const double v0 = terms[r].value(base);
                const double slope = terms[r].coeffs.dot(dir);
                if (slope > 0.0) {
                    lo = std::max(lo, -v0 / slope);
                } else if (slope < 0.0) {
                    hi = std::min(hi, -v0 / slope);
                } else if (!(v0 > 0.0)) {
                    hi = -std::numeric_limits<double>::infinity();
                }
            }
            const Vector near_base = base + offset * normal;
            const Vector far_base = base - offset * normal;
            const auto [nlo, nhi] = box_interval(net.input_bounds, near_base, dir);
            const auto [flo, fhi] = box_interval(net.input_bounds, far_base, dir);
            lo = std::max({lo, nlo, flo});
            hi = std::min({hi, nhi, fhi});
            if (!(hi - lo > min_overlap)) continue;

            const auto near = walk_line(net, cache, near_base, dir, lo, hi, eta, kMaxSegments);
            const auto far = walk_line(net, cache, far_base, dir, lo, hi, eta, kMaxSegments);
            std::size_t j = 0;
            for (const auto& a : near) {
                while (j < far.size() && far[j].t1 <= a.t0) ++j;
                for (std::size_t k = j; k < far.size() && far[k].t0 < a.t1; ++k) {
                    const auto& b = far[k];
                    if (a.key == b.key) continue;
                    if (std::min(a.t1, b.t1) - std::max(a.t0, b.t0) <= min_overlap) continue;
                    if (!seen.insert(std::minmax(a.key, b.key)).second) continue;
                    hits.push_back({a.key, b.key, a.pattern, b.pattern, a.point, b.point});
                }
            }
        }
    }
    return hits;
}

}  // namespace

void compute_components(ClassificationGraph& graph) {
    const std::size_t n = graph.vertices.size();
    UnionFind uf(n);
    for (const auto& [i, j] : graph.edges) {
        if (graph.vertices[i].region.class_label == graph.vertices[j].region.class_label) uf.unite(i, j);
    }
    std::map<std::size_t, std::size_t> root_to_component;
    graph.components.clear();
    graph.component_of.assign(n, 0);
    for (std::size_t v = 0; v < n; ++v) {
        const std::size_t root = uf.find(v);
        auto [it, inserted] = root_to_component.try_emplace(root, graph.components.size());
        if (inserted) graph.components.emplace_back();
        graph.components[it->second].push_back(v);
        graph.component_of[v] = it->second;
    }
}

ClassificationGraph build_graph(const SDNetwork& net, std::vector<Vertex> vertices,
                                const GraphOptions& options) {
    ClassificationGraph graph;
    std::map<RegionKey, std::size_t> index;
    for (auto& v : vertices) {
        const RegionKey key = v.key();
        if (index.count(key)) throw ContractViolation("build_graph: duplicate vertex");
        index.emplace(key, graph.vertices.size());
        graph.vertices.push_back(std::move(v));
    }
    std::set<std::pair<RegionKey, RegionKey>> key_edges;
    std::vector<std::size_t> pending(graph.vertices.size());
    std::iota(pending.begin(), pending.end(), std::size_t{0});

    while (!pending.empty()) {
        std::vector<std::vector<NeighborHit>> found(pending.size());
        parallel_for(pending.size(), options.threads, [&](std::size_t slot) {
            Vertex& v = graph.vertices[pending[slot]];
            Rng rng(key_seed(options.seed, v.key(), 1));
            if (v.samples.draws == 0) {
                v.samples = sample_region(net, v.region, options.budgets.region_samples, rng);
            }
            found[slot] = probe_vertex(net, v, options.budgets.probes_per_boundary, rng);
        });

        std::map<RegionKey, std::size_t> fresh;  // new vertices of this round
        auto ensure = [&](const RegionKey& key, const ActivationPattern& pattern, const Vector& point) {
            if (index.count(key)) return true;
            if (index.size() >= options.budgets.max_vertices) {
                if (graph.complete) {
                    graph.warnings.push_back("vertex budget of " +
                                             std::to_string(options.budgets.max_vertices) +
                                             " reached; graph is incomplete");
                }
                graph.complete = false;
                return false;
            }
            Vertex v;
            v.region = region_rules(net, key.class_label, pattern);
            v.witness = point;
            if (!v.region.box) v.region.box = Box(v.witness, v.witness);
            v.region.populated = true;
            index.emplace(key, graph.vertices.size());
            fresh.emplace(key, graph.vertices.size());
            graph.vertices.push_back(std::move(v));
            return true;
        };
        for (std::size_t slot = 0; slot < pending.size(); ++slot) {
            for (const auto& hit : found[slot]) {
                const bool a = ensure(hit.a, hit.pattern_a, hit.point_a);
                const bool b = ensure(hit.b, hit.pattern_b, hit.point_b);
                if (a && b) key_edges.insert(std::minmax(hit.a, hit.b));
            }
        }
        pending.clear();
        for (const auto& [key, idx] : fresh) pending.push_back(idx);
    }

    std::sort(graph.vertices.begin(), graph.vertices.end(),
              [](const Vertex& a, const Vertex& b) { return a.key() < b.key(); });
    for (const auto& [a, b] : key_edges) {
        const std::size_t i = graph.find_vertex(a);
        const std::size_t j = graph.find_vertex(b);
        if (i != ClassificationGraph::npos && j != ClassificationGraph::npos && i != j) {
            graph.edges.insert(std::minmax(i, j));
        }
    }
    for (const auto& v : graph.vertices) {
        if (v.samples.thin) {
            graph.warnings.push_back("region " + std::to_string(v.region.class_label) + ":" +
                                     to_string(v.region.pattern) +
                                     " is thin (no accepted samples); excluded from ball statistics");
        }
    }
    compute_components(graph);
    return graph;
}

std::optional<LimitingBall> limiting_ball(const std::vector<const RegionSamples*>& members) {
    std::vector<const RegionSamples*> usable;
    for (const auto* m : members) {
        if (m && !m->thin && !m->points.empty()) usable.push_back(m);
    }
    if (usable.empty()) return std::nullopt;

    const Eigen::Index dim = usable.front()->points.front().size();
    Vector center = Vector::Zero(dim);
    double weight = 0.0;
    double volume = 0.0;
    std::size_t count = 0;
    for (const auto* m : usable) {
        Vector mean = Vector::Zero(dim);
        for (const auto& p : m->points) mean += p;
        mean /= double(m->points.size());
        center += m->volume_estimate * mean;
        weight += m->volume_estimate;
        volume += m->volume_estimate;
        count += m->points.size();
    }
    if (weight > 0.0) {
        center /= weight;
    } else {
        // Degenerate boxes carry no volume; fall back to equal weights.
        center.setZero();
        for (const auto* m : usable) {
            Vector mean = Vector::Zero(dim);
            for (const auto& p : m->points) mean += p;
            center += mean / double(m->points.size());
        }
        center /= double(usable.size());
    }
    double radius = 0.0;
    for (const auto* m : usable) {
        for (const auto& p : m->points) radius = std::max(radius, linf(p, center));
    }
    return LimitingBall{std::move(center), radius, volume, count};
}

bool detect_small_isolated(const LimitingBall& ball, double R) { return ball.radius < R; }

ProtrudingEvidence detect_protruding(const SDNetwork& net, int class_label, const LimitingBall& ball,
                                     double r, std::size_t n, Rng& rng) {
    ProtrudingEvidence ev;
    const Vector lo = (ball.center.array() - ball.radius).max(net.input_bounds.lower.array());
    const Vector hi = (ball.center.array() + ball.radius).min(net.input_bounds.upper.array());
    for (std::size_t t = 0; t < n; ++t) {
        if (forward(net, uniform_in(lo, hi, rng)).predicted() == class_label) ++ev.same_class;
    }
    ev.draws = n;
    ev.protruding = n > 0 && ev.fraction() < r;
    return ev;
}

std::string to_string(FindingKind kind) {
    return kind == FindingKind::SmallIsolated ? "small_isolated" : "protruding";
}

std::vector<std::size_t> VerificationReport::adversarial_vertices() const {
    std::set<std::size_t> out;
    for (const auto& f : findings) out.insert(f.vertices.begin(), f.vertices.end());
    return {out.begin(), out.end()};
}

void detect_adversarial_regions(const SDNetwork& net, VerificationReport& report) {
    const auto& graph = report.graph;
    const auto& params = report.params;
    report.findings.clear();
    report.vertex_balls.assign(graph.vertices.size(), std::nullopt);
    report.component_balls.assign(graph.components.size(), std::nullopt);
    report.warnings = graph.warnings;

    for (std::size_t v = 0; v < graph.vertices.size(); ++v) {
        report.vertex_balls[v] = limiting_ball({&graph.vertices[v].samples});
    }
    std::vector<bool> small(graph.components.size(), false);
    for (std::size_t c = 0; c < graph.components.size(); ++c) {
        std::vector<const RegionSamples*> members;
        for (std::size_t v : graph.components[c]) members.push_back(&graph.vertices[v].samples);
        report.component_balls[c] = limiting_ball(members);
        const auto& ball = report.component_balls[c];
        const int cls = graph.vertices[graph.components[c].front()].region.class_label;
        if (!ball) {
            report.warnings.push_back("component " + std::to_string(c) +
                                      ": every region is thin, no limiting ball; needs manual review");
            continue;
        }
        if (detect_small_isolated(*ball, params.R)) {
            small[c] = true;
            Finding f;
            f.kind = FindingKind::SmallIsolated;
            f.class_label = cls;
            f.component = c;
            f.vertices = graph.components[c];
            f.ball = *ball;
            f.evidence = ball->radius / params.R;
            report.findings.push_back(std::move(f));
        }
    }

    std::vector<std::optional<ProtrudingEvidence>> evidence(graph.vertices.size());
    parallel_for(graph.vertices.size(), params.threads, [&](std::size_t v) {
        if (small[graph.component_of[v]] || !report.vertex_balls[v]) return;
        const Vertex& vx = graph.vertices[v];
        Rng rng(key_seed(params.seed, vx.key(), 3));
        evidence[v] = detect_protruding(net, vx.region.class_label, *report.vertex_balls[v],
                                        params.r, params.budgets.ball_samples, rng);
    });
    for (std::size_t v = 0; v < graph.vertices.size(); ++v) {
        if (!evidence[v] || !evidence[v]->protruding) continue;
        Finding f;
        f.kind = FindingKind::Protruding;
        f.class_label = graph.vertices[v].region.class_label;
        f.component = graph.component_of[v];
        f.vertices = {v};
        f.ball = *report.vertex_balls[v];
        f.evidence = evidence[v]->fraction();
        report.findings.push_back(std::move(f));
    }
}

VerificationReport verify_global(const SDNetwork& net, const Dataset* data,
                                 const VerifyParams& params) {
    net.validate();
    if (!(params.R > 0.0) || !(params.r > 0.0)) {
        throw ContractViolation("verify_global: R and r must be positive");
    }
    VerificationReport report;
    report.params = params;
    Rng discover_rng(derive_seed(params.seed, 0xd15c));
    auto vertices = discover_populated_regions(net, data, params.budgets.discover_samples, discover_rng);
    GraphOptions options{params.budgets, params.seed, params.threads};
    report.graph = build_graph(net, std::move(vertices), options);
    report.complete = report.graph.complete;
    detect_adversarial_regions(net, report);
    if (!report.complete) {
        report.warnings.push_back(
            "verification incomplete: a budget was exhausted, the verdict covers only the explored graph");
    }
    return report;
}

std::vector<Vector> extract_adversarial_examples(const SDNetwork& net, const Region& region,
                                                 std::size_t count, std::uint64_t seed) {
    std::vector<Vector> out;
    if (count == 0 || !region.box) return out;
    Rng rng(seed);
    const std::size_t max_draws = std::max<std::size_t>(count * 1000, 100000);
    for (std::size_t t = 0; t < max_draws && out.size() < count; ++t) {
        Vector x = uniform_in(region.box->lower, region.box->upper, rng);
        if (realizes(forward(net, x), region)) out.push_back(std::move(x));
    }
    return out;
}

}  // namespace sdnv
