#include "sdnv/linrules.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace sdnv {

namespace {

void require_dim(Eigen::Index got, Eigen::Index want, const char* what) {
    if (got != want) {
        throw ContractViolation(std::string(what) + ": dimension " + std::to_string(got) +
                                " does not match " + std::to_string(want));
    }
}

}  // namespace

LinearInequality::LinearInequality(int layer_id, Vector c, double b)
    : layer(layer_id), coeffs(std::move(c)), offset(b) {}

LinearInequality LinearInequality::make(int layer_id, Vector c, double b, Relation rel) {
    if (rel == Relation::Less) {
        return LinearInequality(layer_id, -c, -b);
    }
    return LinearInequality(layer_id, std::move(c), b);
}

double LinearInequality::value(const Vector& point) const {
    require_dim(point.size(), coeffs.size(), "evaluate");
    return coeffs.dot(point) + offset;
}

bool LinearInequality::is_constant() const {
    return coeffs.size() == 0 || coeffs.cwiseAbs().maxCoeff() == 0.0;
}

LinearInequality LinearInequality::negated() const {
    return LinearInequality(layer, -coeffs, -offset);
}

LinearInequality LinearInequality::normalized() const {
    LinearInequality out = *this;
    const double scale = coeffs.size() ? coeffs.cwiseAbs().maxCoeff() : 0.0;
    const double cutoff = scale * 1e-15;
    for (Eigen::Index i = 0; i < out.coeffs.size(); ++i) {
        if (std::abs(out.coeffs[i]) <= cutoff) out.coeffs[i] = 0.0;
    }
    if (out.offset == 0.0) out.offset = 0.0;  // drops -0.0
    return out;
}

bool LinearInequality::operator==(const LinearInequality& o) const {
    return layer == o.layer && offset == o.offset && coeffs.size() == o.coeffs.size() &&
           coeffs == o.coeffs;
}

bool evaluate(const LinearInequality& ineq, const Vector& point) {
    if (ineq.is_constant()) {
        require_dim(ineq.coeffs.size(), point.size(), "evaluate");
        return ineq.offset > 0.0;
    }
    return ineq.value(point) > -kStrictTolerance;
}

bool RuleConjunction::holds(const Vector& point) const {
    return std::all_of(terms.begin(), terms.end(),
                       [&](const LinearInequality& t) { return evaluate(t, point); });
}

void RuleConjunction::add(LinearInequality ineq) {
    if (!terms.empty() && ineq.layer != layer) {
        throw ContractViolation("conjunction mixes layers");
    }
    if (terms.empty()) layer = ineq.layer;
    terms.push_back(std::move(ineq));
}

void RuleConjunction::append(const RuleConjunction& other) {
    for (const auto& t : other.terms) add(t);
}

bool RuleDNF::holds(const Vector& point) const {
    return std::any_of(clauses.begin(), clauses.end(),
                       [&](const RuleConjunction& c) { return c.holds(point); });
}

AffineMap::AffineMap(Matrix w, Vector b, int source, int target)
    : weights(std::move(w)), biases(std::move(b)), source_layer(source), target_layer(target) {
    require_dim(biases.size(), weights.rows(), "AffineMap biases");
}

Box::Box(Vector lo, Vector hi) : lower(std::move(lo)), upper(std::move(hi)) {
    require_dim(upper.size(), lower.size(), "Box");
    for (Eigen::Index i = 0; i < lower.size(); ++i) {
        if (!(lower[i] <= upper[i])) throw ContractViolation("Box: lower > upper");
    }
}

Box Box::uniform(Eigen::Index dim, double lo, double hi) {
    return Box(Vector::Constant(dim, lo), Vector::Constant(dim, hi));
}

bool Box::contains(const Vector& x, double slack) const {
    require_dim(x.size(), lower.size(), "Box::contains");
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (x[i] < lower[i] - slack || x[i] > upper[i] + slack) return false;
    }
    return true;
}

double Box::volume() const { return (upper - lower).prod(); }

double Box::diameter() const { return dim() ? (upper - lower).maxCoeff() : 0.0; }

LinearInequality substitute_affine(const LinearInequality& ineq, const AffineMap& map,
                                   const Vector& scale_per_var) {
    if (map.target_layer != ineq.layer) {
        throw ContractViolation("substitute_affine: map target layer differs from rule layer");
    }
    require_dim(ineq.coeffs.size(), map.out_dim(), "substitute_affine rule");
    require_dim(scale_per_var.size(), map.out_dim(), "substitute_affine scale");
    const Vector weighted = scale_per_var.cwiseProduct(ineq.coeffs);
    Vector c = map.weights.transpose() * weighted;
    const double b = weighted.dot(map.biases) + ineq.offset;
    return LinearInequality(map.source_layer, std::move(c), b).normalized();
}

std::optional<Box> bounding_box(const RuleConjunction& rules, const Box& input_bounds) {
    Vector lo = input_bounds.lower;
    Vector hi = input_bounds.upper;
    const Eigen::Index n = lo.size();

    for (const auto& t : rules.terms) {
        require_dim(t.coeffs.size(), n, "bounding_box");
        if (t.is_constant() && !(t.offset > 0.0)) return std::nullopt;
    }

    // Each pass applies every one-sided bound; later passes reuse the
    // tightened box, so a few passes reach a fixed point in practice.
    constexpr int kMaxPasses = 8;
    for (int pass = 0; pass < kMaxPasses; ++pass) {
        double moved = 0.0;
        for (const auto& t : rules.terms) {
            if (t.is_constant()) continue;
            // Largest value of the rule's left side over the current box.
            double total = t.offset;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double c = t.coeffs[i];
                total += std::max(c * lo[i], c * hi[i]);
            }
            for (Eigen::Index k = 0; k < n; ++k) {
                const double c = t.coeffs[k];
                if (c == 0.0) continue;
                const double rest = total - std::max(c * lo[k], c * hi[k]);
                const double bound = -(rest + kStrictTolerance) / c;
                if (!std::isfinite(bound)) continue;
                if (c > 0.0 && bound > lo[k]) {
                    moved = std::max(moved, bound - lo[k]);
                    lo[k] = bound;
                } else if (c < 0.0 && bound < hi[k]) {
                    moved = std::max(moved, hi[k] - bound);
                    hi[k] = bound;
                }
                if (lo[k] > hi[k]) return std::nullopt;
                total = rest + std::max(c * lo[k], c * hi[k]);
            }
        }
        if (moved <= 1e-12) break;
    }
    return Box(std::move(lo), std::move(hi));
}

}  // namespace sdnv
