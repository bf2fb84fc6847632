#include "sdnv/linrules.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace sdnv;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

Vector random_vector(Eigen::Index n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
    return v;
}

}  // namespace

TEST_CASE("evaluate follows the sign of the affine form") {
    const LinearInequality d(0, vec({1, -1}), 0.0);
    CHECK(evaluate(d, vec({2, 1})));
    CHECK_FALSE(evaluate(d, vec({1, 2})));

    // x1 > x0 at (0.2, 0.7)
    const LinearInequality x1_gt_x0(0, vec({-1, 1}), 0.0);
    CHECK(evaluate(x1_gt_x0, vec({0.2, 0.7})));
}

TEST_CASE("strictness tolerance admits points within 1e-9 of the boundary") {
    const LinearInequality x(0, vec({1.0}), 0.0);
    CHECK(evaluate(x, vec({-5e-10})));
    CHECK_FALSE(evaluate(x, vec({-2e-9})));
}

TEST_CASE("evaluate rejects mismatched dimensions") {
    const LinearInequality d(0, vec({1, -1}), 0.0);
    CHECK_THROWS_AS(evaluate(d, vec({1, 2, 3})), ContractViolation);
}

TEST_CASE("less-than rules are stored negated") {
    const auto lt = LinearInequality::make(0, vec({2, 3}), 1.0, Relation::Less);
    CHECK(lt.coeffs == vec({-2, -3}));
    CHECK(lt.offset == -1.0);
    CHECK(evaluate(lt, vec({-1, -1})));
    CHECK_FALSE(evaluate(lt, vec({1, 1})));
}

TEST_CASE("degenerate inequality is a constant decided by the offset") {
    const LinearInequality pos(0, vec({0, 0}), 0.5);
    const LinearInequality neg(0, vec({0, 0}), -0.5);
    CHECK(pos.is_constant());
    for (double x : {-3.0, 0.0, 7.0}) {
        CHECK(evaluate(pos, vec({x, -x})));
        CHECK_FALSE(evaluate(neg, vec({x, -x})));
    }
}

TEST_CASE("normalization is idempotent") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 200; ++t) {
        Vector c = random_vector(5, rng);
        c[t % 5] = 1e-18;
        const LinearInequality p(1, c, t % 3 == 0 ? -0.0 : 0.25);
        const auto once = p.normalized();
        CHECK(once.normalized() == once);
        CHECK(once.coeffs[t % 5] == 0.0);
        CHECK_FALSE(std::signbit(once.offset));
    }
}

TEST_CASE("substitute_affine maps the warm-up rule y0 > y1 to x1 - x0 > 0") {
    Matrix w(2, 2);
    w << 0, 1, 1, 0;  // y'0 = x1, y'1 = x0
    const AffineMap map(w, Vector::Zero(2), 0, 1);
    const LinearInequality y0_gt_y1(1, vec({1, -1}), 0.0);
    const auto r = substitute_affine(y0_gt_y1, map, Vector::Ones(2));
    CHECK(r.layer == 0);
    CHECK(r.coeffs == vec({-1, 1}));
    CHECK(r.offset == 0.0);
}

TEST_CASE("substitute_affine through the identity leaves a rule unchanged") {
    const AffineMap id(Matrix::Identity(3, 3), Vector::Zero(3), 0, 1);
    const LinearInequality p(1, vec({0.5, -2, 3}), 0.75);
    const auto r = substitute_affine(p, id, Vector::Ones(3));
    CHECK(r.coeffs == p.coeffs);
    CHECK(r.offset == p.offset);
}

TEST_CASE("substitute_affine commutes with evaluation") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> pick(0, 2);
    const double scales[] = {0.0, 1.0, 2.0};
    for (int trial = 0; trial < 50; ++trial) {
        const AffineMap map(Matrix::Random(3, 3), Vector::Random(3), 0, 1);
        const LinearInequality p(1, random_vector(3, rng), random_vector(1, rng)[0]);
        Vector s(3);
        for (int i = 0; i < 3; ++i) s[i] = scales[pick(rng)];
        const auto q = substitute_affine(p, map, s);
        for (int k = 0; k < 100; ++k) {
            const Vector x = random_vector(3, rng, -2, 2);
            const Vector y = s.cwiseProduct(map.apply(x));
            CHECK(q.value(x) == Catch::Approx(p.value(y)).margin(1e-12));
        }
    }
}

TEST_CASE("substitute_affine rejects mismatched layers and sizes") {
    const AffineMap map(Matrix::Identity(2, 2), Vector::Zero(2), 0, 1);
    CHECK_THROWS_AS(substitute_affine(LinearInequality(2, vec({1, 1}), 0), map, Vector::Ones(2)),
                    ContractViolation);
    CHECK_THROWS_AS(substitute_affine(LinearInequality(1, vec({1, 1}), 0), map, Vector::Ones(3)),
                    ContractViolation);
}

TEST_CASE("bounding box of a single-variable rule") {
    RuleConjunction rules;
    rules.add(LinearInequality(0, vec({1, 0}), -1.0));  // x0 - 1 > 0
    const auto box = bounding_box(rules, Box::uniform(2, -2, 2));
    REQUIRE(box);
    CHECK(box->lower[0] == Catch::Approx(1.0).margin(1e-8));
    CHECK(box->upper[0] == 2.0);
    CHECK(box->lower[1] == -2.0);
    CHECK(box->upper[1] == 2.0);
}

TEST_CASE("bounding box uses worst-case values of the other variables") {
    // 2 x0 + x1 - x2 - 3.5 > 0 over [-2,2]^3 gives
    // x0 > (3.5 - max(x1) + min(x2)) / 2 = (3.5 - 2 - 2) / 2 = -0.25.
    RuleConjunction rules;
    rules.add(LinearInequality(0, vec({2, 1, -1}), -3.5));
    const auto box = bounding_box(rules, Box::uniform(3, -2, 2));
    REQUIRE(box);
    CHECK(box->lower[0] == Catch::Approx(-0.25).margin(1e-8));
}

TEST_CASE("empty region yields no box") {
    RuleConjunction rules;
    rules.add(LinearInequality(0, vec({1, 0}), -1.0));  // x0 > 1
    rules.add(LinearInequality(0, vec({-1, 0}), 0.5));  // x0 < 0.5
    CHECK_FALSE(bounding_box(rules, Box::uniform(2, -2, 2)).has_value());
}

TEST_CASE("bounding box contains every point of its region") {
    std::mt19937_64 rng(5);
    const Box bounds = Box::uniform(3, -1, 1);
    std::size_t checked = 0;
    for (int trial = 0; trial < 40; ++trial) {
        RuleConjunction rules;
        for (int t = 0; t < 3; ++t) rules.add(LinearInequality(0, random_vector(3, rng), random_vector(1, rng)[0] * 0.5));
        const auto box = bounding_box(rules, bounds);
        for (int k = 0; k < 500; ++k) {
            const Vector x = random_vector(3, rng);
            if (!rules.holds(x)) continue;
            REQUIRE(box);
            CHECK(box->contains(x, 1e-9));
            ++checked;
        }
    }
    CHECK(checked >= 1000);
}

TEST_CASE("box geometry") {
    const Box b(vec({0, -1}), vec({2, 3}));
    CHECK(b.volume() == 8.0);
    CHECK(b.diameter() == 4.0);
    CHECK(b.center() == vec({1, 1}));
    CHECK(b.contains(vec({2, 3})));
    CHECK_FALSE(b.contains(vec({2.1, 0})));
    CHECK_THROWS_AS(Box(vec({1}), vec({0})), ContractViolation);
}

TEST_CASE("conjunction and DNF semantics") {
    RuleConjunction empty;
    CHECK(empty.holds(vec({0, 0})));
    RuleConjunction a;
    a.add(LinearInequality(0, vec({1, 0}), 0));
    RuleConjunction b;
    b.add(LinearInequality(0, vec({0, 1}), 0));
    RuleDNF dnf;
    dnf.clauses = {a, b};
    CHECK(dnf.holds(vec({1, -1})));
    CHECK(dnf.holds(vec({-1, 1})));
    CHECK_FALSE(dnf.holds(vec({-1, -1})));
    CHECK_THROWS_AS(a.add(LinearInequality(1, vec({1, 0}), 0)), ContractViolation);
}
