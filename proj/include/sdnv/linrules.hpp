#pragma once

// Linear inequalities over one layer's coordinates, in the single normal form
//   sum_i c_i * x_i + b > 0.
// Every rule produced by the back-propagation is stored this way; a "<" rule
// is built by negating coefficients and offset.

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <vector>

namespace sdnv {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Slack applied to ">" during numeric evaluation: a rule holds when
/// sum c_i x_i + b > -kStrictTolerance.
inline constexpr double kStrictTolerance = 1e-9;

class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

enum class Relation { Greater, Less };

struct LinearInequality {
    int layer = 0;
    Vector coeffs;
    double offset = 0.0;

    LinearInequality() = default;
    LinearInequality(int layer_id, Vector c, double b);

    /// Builds `c.x + b (rel) 0` and stores it in normal form.
    static LinearInequality make(int layer_id, Vector c, double b, Relation rel);

    std::size_t dim() const { return static_cast<std::size_t>(coeffs.size()); }
    double value(const Vector& point) const;

    /// All coefficients zero: the rule is the constant `b > 0`.
    bool is_constant() const;

    /// The rule for the opposite open half-space.
    LinearInequality negated() const;

    /// Flushes signed zeros and coefficients negligible relative to the
    /// largest one. Idempotent.
    LinearInequality normalized() const;

    bool operator==(const LinearInequality& o) const;
};

bool evaluate(const LinearInequality& ineq, const Vector& point);

/// Conjunction of inequalities on one layer; empty means "always true".
struct RuleConjunction {
    int layer = 0;
    std::vector<LinearInequality> terms;

    bool holds(const Vector& point) const;
    void add(LinearInequality ineq);
    void append(const RuleConjunction& other);
};

struct RuleDNF {
    int layer = 0;
    std::vector<RuleConjunction> clauses;

    bool holds(const Vector& point) const;
};

/// Dense affine map between two layers: target = weights * source + biases.
/// weights(j, i) is the weight from source neuron i to target neuron j.
struct AffineMap {
    Matrix weights;
    Vector biases;
    int source_layer = 0;
    int target_layer = 1;

    AffineMap() = default;
    AffineMap(Matrix w, Vector b, int source, int target);

    Eigen::Index in_dim() const { return weights.cols(); }
    Eigen::Index out_dim() const { return weights.rows(); }
    Vector apply(const Vector& x) const { return weights * x + biases; }
};

struct Box {
    Vector lower;
    Vector upper;

    Box() = default;
    Box(Vector lo, Vector hi);
    static Box uniform(Eigen::Index dim, double lo, double hi);

    Eigen::Index dim() const { return lower.size(); }
    bool contains(const Vector& x, double slack = 0.0) const;
    double volume() const;
    /// L-infinity diameter (largest side).
    double diameter() const;
    Vector center() const { return 0.5 * (lower + upper); }
};

/// Rewrites a rule on layer h as a rule on layer h-1. Variable i of the rule
/// is replaced by scale[i] * (row i of the map applied to layer h-1); a zero
/// scale removes the variable.
LinearInequality substitute_affine(const LinearInequality& ineq, const AffineMap& map,
                                   const Vector& scale_per_var);

/// Axis-aligned box enclosing every point of `input_bounds` that satisfies
/// the conjunction. Returns nullopt when the bounds cross, i.e. the region is
/// certified empty.
std::optional<Box> bounding_box(const RuleConjunction& rules, const Box& input_bounds);

}  // namespace sdnv
