#pragma once

// Shared fixtures and oracles for the unit and acceptance tests.

#include "sdnv/data.hpp"
#include "sdnv/rgrv.hpp"
#include "sdnv/rulemap.hpp"
#include "sdnv/sdn.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <map>
#include <set>
#include <utility>

namespace sdnv::testing {

/// Warm-up net: y'0 = x1, y'1 = x0, output y = activation(y').
inline ReluNetwork warmup_relu() {
    ReluNetwork net;
    Matrix w(2, 2);
    w << 0, 1, 1, 0;
    net.layers.emplace_back(w, Vector::Zero(2), 0, 1);
    net.layers.emplace_back(Matrix::Identity(2, 2), Vector::Zero(2), 1, 2);
    net.classes = 2;
    return net;
}

/// The same net with SDA (two groups of one neuron) over [-2,2]^2.
inline SDNetwork warmup_sdn(double alpha = 2.0) {
    SDNetwork net;
    Matrix w(2, 2);
    w << 0, 1, 1, 0;
    net.layers.emplace_back(w, Vector::Zero(2), 0, 1);
    net.layers.emplace_back(Matrix::Identity(2, 2), Vector::Zero(2), 1, 2);
    net.group_size = {1};
    net.group_count = {2};
    net.alpha = alpha;
    net.classes = 2;
    net.input_bounds = Box::uniform(2, -2.0, 2.0);
    return net;
}

/// Unit box split at x0 = 0.5: two groups of one neuron, x0 - 0.5 and
/// 0.5 - x0, identity output. Class 0 right of the split, class 1 left.
inline SDNetwork half_space_net() {
    SDNetwork net;
    Matrix w(2, 2);
    w << 1, 0, -1, 0;
    Vector b(2);
    b << -0.5, 0.5;
    net.layers.emplace_back(w, b, 0, 1);
    net.layers.emplace_back(Matrix::Identity(2, 2), Vector::Zero(2), 1, 2);
    net.group_size = {1};
    net.group_count = {2};
    net.alpha = 2.0;
    net.classes = 2;
    net.input_bounds = Box::uniform(2, 0.0, 1.0);
    return net;
}

inline Dataset synth_data(std::uint64_t seed, bool blob = true) {
    Synth2DConfig cfg;
    cfg.seed = seed;
    cfg.plant_blob = blob;
    return gen_synth2d(cfg);
}

/// Small SDN trained on the planted-noise 2D data.
inline SDNetwork synth_net(std::uint64_t seed, const std::string& arch = "12x3,12x3",
                           int epochs = 1000) {
    const Dataset data = synth_data(seed);
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.batch_size = 64;
    cfg.learning_rate = 3e-3;
    cfg.seed = seed;
    return train(parse_architecture(arch), 2.0, data, cfg);
}

/// Smallest pre-activation magnitude over all hidden layers for every
/// sample of `inputs`.
inline double min_preactivation_magnitude(const SDNetwork& net, const Matrix& inputs) {
    double m = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < inputs.cols(); ++c) {
        const auto trace = forward_trace(net, inputs.col(c));
        for (std::size_t h = 0; h + 1 < trace.size(); ++h) m = std::min(m, trace[h].cwiseAbs().minCoeff());
    }
    return m;
}

/// ||analytic - numeric|| / max(||analytic||, ||numeric||) over all weights
/// and biases, numeric gradients by central differences of `loss`.
inline double gradient_relative_error(const SDNetwork& net, const Dataset& batch, const TrainConfig& cfg,
                                      double h = 1e-6) {
    const LossGradient g = loss_and_gradient(net, batch.inputs, batch.labels, cfg);
    std::vector<double> analytic, numeric;
    SDNetwork probe = net;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        auto& w = probe.layers[l].weights;
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
            for (Eigen::Index j = 0; j < w.cols(); ++j) {
                const double orig = w(i, j);
                w(i, j) = orig + h;
                const double up = loss(probe, batch, cfg);
                w(i, j) = orig - h;
                const double down = loss(probe, batch, cfg);
                w(i, j) = orig;
                numeric.push_back((up - down) / (2 * h));
                analytic.push_back(g.weight_grads[l](i, j));
            }
        }
        auto& b = probe.layers[l].biases;
        for (Eigen::Index i = 0; i < b.size(); ++i) {
            const double orig = b[i];
            b[i] = orig + h;
            const double up = loss(probe, batch, cfg);
            b[i] = orig - h;
            const double down = loss(probe, batch, cfg);
            b[i] = orig;
            numeric.push_back((up - down) / (2 * h));
            analytic.push_back(g.bias_grads[l][i]);
        }
    }
    const Eigen::Map<const Vector> a(analytic.data(), Eigen::Index(analytic.size()));
    const Eigen::Map<const Vector> n(numeric.data(), Eigen::Index(numeric.size()));
    const double scale = std::max(a.norm(), n.norm());
    return scale > 0.0 ? (a - n).norm() / scale : 0.0;
}

/// XOR quadrants on [-1,1]^2: class 1 where x0 * x1 > 0.
inline Dataset xor_data(int n, std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Dataset d;
    d.inputs.resize(2, n);
    d.labels.resize(std::size_t(n));
    for (int i = 0; i < n; ++i) {
        d.inputs(0, i) = u(rng);
        d.inputs(1, i) = u(rng);
        d.labels[std::size_t(i)] = d.inputs(0, i) * d.inputs(1, i) > 0 ? 1 : 0;
    }
    d.classes = 2;
    d.input_bounds = Box::uniform(2, -1.0, 1.0);
    return d;
}

inline RegionKey region_of(const SDNetwork& net, const Vector& x) {
    const auto fr = forward(net, x);
    return {fr.predicted(), pattern_number(fr.pattern, net.group_count)};
}

using KeyEdge = std::pair<RegionKey, RegionKey>;

inline KeyEdge make_edge(RegionKey a, RegionKey b) {
    if (b < a) std::swap(a, b);
    return {a, b};
}

struct GridOracle {
    std::set<RegionKey> regions;
    std::set<KeyEdge> edges;
};

/// Adjacency seen on a res x res grid of cell centers. Each pair of
/// 4-neighbor cells in different regions is refined by bisecting the segment
/// between them, so regions crossed between the two centers are recorded
/// along with the edges between consecutive ones.
inline GridOracle grid_oracle(const SDNetwork& net, int res, double tol = 1e-10) {
    const Box& box = net.input_bounds;
    auto point = [&](int i, int j) {
        Vector p(2);
        p << box.lower[0] + (i + 0.5) / res * (box.upper[0] - box.lower[0]),
            box.lower[1] + (j + 0.5) / res * (box.upper[1] - box.lower[1]);
        return p;
    };
    std::vector<RegionKey> keys(std::size_t(res) * res);
    GridOracle out;
    for (int j = 0; j < res; ++j) {
        for (int i = 0; i < res; ++i) {
            keys[std::size_t(j) * res + i] = region_of(net, point(i, j));
            out.regions.insert(keys[std::size_t(j) * res + i]);
        }
    }
    auto refine = [&](auto&& self, const Vector& a, const RegionKey& ka, const Vector& b,
                      const RegionKey& kb) -> void {
        if (ka == kb) return;
        if ((b - a).lpNorm<Eigen::Infinity>() < tol) {
            out.edges.insert(make_edge(ka, kb));
            return;
        }
        Vector m = 0.5 * (a + b);
        // A pre-activation of exactly zero realizes a measure-zero pattern.
        if (min_preactivation_magnitude(net, m) == 0.0) m = a + 0.5000001 * (b - a);
        const RegionKey km = region_of(net, m);
        out.regions.insert(km);
        if (km == ka) {
            self(self, m, km, b, kb);
        } else if (km == kb) {
            self(self, a, ka, m, km);
        } else {
            self(self, a, ka, m, km);
            self(self, m, km, b, kb);
        }
    };
    for (int j = 0; j < res; ++j) {
        for (int i = 0; i < res; ++i) {
            const RegionKey& k = keys[std::size_t(j) * res + i];
            if (i + 1 < res) refine(refine, point(i, j), k, point(i + 1, j), keys[std::size_t(j) * res + i + 1]);
            if (j + 1 < res) refine(refine, point(i, j), k, point(i, j + 1), keys[std::size_t(j + 1) * res + i]);
        }
    }
    return out;
}

/// Exact 2D adjacency: starting from the regions of grid_oracle, collects
/// every explicit and implicit rule line of every known region, splits each
/// line at its crossings with all other lines and tests both sides of every
/// piece. Repeats until no new region appears.
inline GridOracle arrangement_oracle(const SDNetwork& net, int res, double delta = 1e-10) {
    GridOracle out = grid_oracle(net, res);
    const Box& box = net.input_bounds;
    std::map<RegionKey, ActivationPattern> patterns;
    for (int j = 0; j < res; ++j) {
        for (int i = 0; i < res; ++i) {
            Vector p(2);
            p << box.lower[0] + (i + 0.5) / res * (box.upper[0] - box.lower[0]),
                box.lower[1] + (j + 0.5) / res * (box.upper[1] - box.lower[1]);
            const auto fr = forward(net, p);
            patterns.try_emplace({fr.predicted(), pattern_number(fr.pattern, net.group_count)}, fr.pattern);
        }
    }
    std::set<RegionKey> lined;
    std::vector<std::array<double, 3>> lines;  // unit normal (a, b) and offset c
    auto add_line = [&](const LinearInequality& t) {
        const double n = t.coeffs.norm();
        if (n == 0.0) return;
        std::array<double, 3> l{t.coeffs[0] / n, t.coeffs[1] / n, t.offset / n};
        if (l[0] < 0 || (l[0] == 0 && l[1] < 0)) l = {-l[0], -l[1], -l[2]};
        lines.push_back(l);
    };
    for (;;) {
        const std::size_t before = patterns.size();
        for (const auto& [key, pattern] : patterns) {
            if (!lined.insert(key).second) continue;
            const Region r = region_rules(net, key.class_label, pattern);
            for (const auto& t : r.explicit_rules.terms) add_line(t);
            for (const auto& c : r.implicit_rules.constraints) {
                for (const auto& clause : c.disjuncts.clauses) {
                    for (const auto& t : clause.terms) add_line(t);
                }
            }
        }
        std::sort(lines.begin(), lines.end());
        lines.erase(std::unique(lines.begin(), lines.end(),
                                [](const auto& p, const auto& q) {
                                    return std::abs(p[0] - q[0]) < 1e-12 && std::abs(p[1] - q[1]) < 1e-12 &&
                                           std::abs(p[2] - q[2]) < 1e-12;
                                }),
                    lines.end());

        std::map<RegionKey, ActivationPattern> found;
        for (std::size_t a = 0; a < lines.size(); ++a) {
            const auto& L = lines[a];
            Vector n(2), d(2), base(2);
            n << L[0], L[1];
            d << -L[1], L[0];
            base = -L[2] * n;
            double lo = -1e300, hi = 1e300;
            for (int i = 0; i < 2; ++i) {
                if (d[i] == 0.0) {
                    if (base[i] < box.lower[i] || base[i] > box.upper[i]) lo = hi;
                    continue;
                }
                double t0 = (box.lower[i] - base[i]) / d[i], t1 = (box.upper[i] - base[i]) / d[i];
                if (t0 > t1) std::swap(t0, t1);
                lo = std::max(lo, t0);
                hi = std::min(hi, t1);
            }
            if (!(hi > lo)) continue;
            std::vector<double> cuts{lo, hi};
            for (std::size_t b = 0; b < lines.size(); ++b) {
                if (b == a) continue;
                const auto& M = lines[b];
                const double slope = M[0] * d[0] + M[1] * d[1];
                if (std::abs(slope) < 1e-15) continue;
                const double t = -(M[0] * base[0] + M[1] * base[1] + M[2]) / slope;
                if (t > lo && t < hi) cuts.push_back(t);
            }
            std::sort(cuts.begin(), cuts.end());
            for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
                if (cuts[c + 1] - cuts[c] < 4 * delta) continue;
                const Vector m = base + 0.5 * (cuts[c] + cuts[c + 1]) * d;
                const Vector p = m + delta * n, q = m - delta * n;
                if (!box.contains(p) || !box.contains(q)) continue;
                if (min_preactivation_magnitude(net, p) == 0.0 || min_preactivation_magnitude(net, q) == 0.0) continue;
                const auto fp = forward(net, p), fq = forward(net, q);
                const RegionKey kp{fp.predicted(), pattern_number(fp.pattern, net.group_count)};
                const RegionKey kq{fq.predicted(), pattern_number(fq.pattern, net.group_count)};
                if (kp == kq) continue;
                out.edges.insert(make_edge(kp, kq));
                out.regions.insert(kp);
                out.regions.insert(kq);
                if (!patterns.count(kp)) found.try_emplace(kp, fp.pattern);
                if (!patterns.count(kq)) found.try_emplace(kq, fq.pattern);
            }
        }
        patterns.insert(found.begin(), found.end());
        if (patterns.size() == before) break;
    }
    return out;
}

inline std::set<KeyEdge> graph_edges(const ClassificationGraph& g) {
    std::set<KeyEdge> out;
    for (const auto& [a, b] : g.edges) out.insert(make_edge(g.vertices[a].key(), g.vertices[b].key()));
    return out;
}

}  // namespace sdnv::testing
