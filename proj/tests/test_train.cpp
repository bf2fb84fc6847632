#include "sdnv/sdn.hpp"

#include "support.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace sdnv;
using namespace sdnv::testing;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

}  // namespace

TEST_CASE("penalty is zero when both doors exist") {
    const auto p = door_penalty(vec({1, 2, -1, -2, 0.5, -0.5}), 2);
    CHECK(p.total() == 0.0);
}

TEST_CASE("missing active door charges the negatives of the most positive group") {
    // One group (-0.2, 0.3): no active door, so 0.2 is charged. The group is
    // not all-negative either, so the missing inactive door charges 0.3.
    const auto p = door_penalty(vec({-0.2, 0.3}), 2);
    CHECK(p.missing_active == Catch::Approx(0.2));
    CHECK(p.missing_inactive == Catch::Approx(0.3));
}

TEST_CASE("penalty picks the busiest group, lowest index on ties") {
    // Groups: (-1, 2, -3), (4, 5, -0.5), (6, -7, 8). No all-positive group;
    // G1 and G2 both have two positives, G1 wins; its negative -0.5 is charged.
    // No all-negative group; G0 has the most negatives; its positive 2 is charged.
    const auto p = door_penalty(vec({-1, 2, -3, 4, 5, -0.5, 6, -7, 8}), 3);
    CHECK(p.missing_active == Catch::Approx(0.5));
    CHECK(p.missing_inactive == Catch::Approx(2.0));
}

TEST_CASE("lambda scales the penalty and zero lambda leaves the data loss") {
    const Dataset data = xor_data(64, 1);
    const auto net = SDNetwork::initialize(2, parse_architecture("3x2,3x2"), 2, 2.0, data.input_bounds, 3);
    TrainConfig cfg;
    cfg.lambda = 0.0;
    const auto g0 = loss_and_gradient(net, data.inputs, data.labels, cfg);
    CHECK(g0.penalty == 0.0);
    CHECK(loss(net, data, cfg) == Catch::Approx(g0.data_loss));
    cfg.lambda = 1.0;
    const auto g1 = loss_and_gradient(net, data.inputs, data.labels, cfg);
    cfg.lambda = 2.0;
    const auto g2 = loss_and_gradient(net, data.inputs, data.labels, cfg);
    CHECK(g1.data_loss == g0.data_loss);
    CHECK(g2.penalty == Catch::Approx(2.0 * g1.penalty));
}

TEST_CASE("analytic gradients match central differences at stable points") {
    Rng rng(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    int checked = 0;
    for (int attempt = 0; attempt < 2000 && checked < 40; ++attempt) {
        const auto net = SDNetwork::initialize(3, parse_architecture("3x2,2x3"), 3, 2.0,
                                               Box::uniform(3, -1, 1), 100 + attempt);
        Dataset batch;
        batch.inputs.resize(3, 2);
        for (auto& v : batch.inputs.reshaped()) v = u(rng);
        batch.labels = {attempt % 3, (attempt + 1) % 3};
        batch.classes = 3;
        batch.input_bounds = net.input_bounds;
        if (min_preactivation_magnitude(net, batch.inputs) <= 1e-3) continue;
        TrainConfig cfg;
        cfg.lambda = 0.5;
        cfg.loss_kind = attempt % 2 ? LossKind::SquaredError : LossKind::CrossEntropy;
        CHECK(gradient_relative_error(net, batch, cfg) < 1e-4);
        ++checked;
    }
    CHECK(checked == 40);
}

TEST_CASE("training is deterministic given the seed") {
    const Dataset data = xor_data(200, 2);
    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.batch_size = 32;
    cfg.seed = 5;
    const auto a = train(parse_architecture("4x2"), 2.0, data, cfg);
    const auto b = train(parse_architecture("4x2"), 2.0, data, cfg);
    cfg.seed = 6;
    const auto c = train(parse_architecture("4x2"), 2.0, data, cfg);
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        CHECK(a.layers[l].weights == b.layers[l].weights);
        CHECK(a.layers[l].biases == b.layers[l].biases);
    }
    CHECK(a.layers[0].weights != c.layers[0].weights);
}

TEST_CASE("zero epochs returns the initialization") {
    const Dataset data = xor_data(50, 3);
    TrainConfig cfg;
    cfg.epochs = 0;
    cfg.seed = 9;
    const auto arch = parse_architecture("4x2");
    const auto net = train(arch, 2.0, data, cfg);
    const auto init = SDNetwork::initialize(2, arch, 2, 2.0, data.input_bounds, 9);
    CHECK(net.layers[0].weights == init.layers[0].weights);
}

TEST_CASE("a small SDN learns XOR") {
    const Dataset data = xor_data(1000, 4);
    TrainConfig cfg;
    cfg.epochs = 300;
    cfg.batch_size = 32;
    cfg.learning_rate = 1e-2;
    cfg.seed = 1;
    std::vector<EpochStats> log;
    const auto net = train(parse_architecture("8x2,8x2"), 2.0, data, cfg,
                           [&](const EpochStats& s) { log.push_back(s); });
    CHECK(accuracy(net, data) >= 0.95);
    REQUIRE(log.size() == 300);
    CHECK(log.front().epoch == 0);
    CHECK(log.back().epoch == 299);
    CHECK(log.back().loss < log.front().loss);
}

TEST_CASE("a large penalty drives the sat-rate to one") {
    const Dataset data = xor_data(500, 5);
    TrainConfig cfg;
    cfg.epochs = 200;
    cfg.batch_size = 32;
    cfg.learning_rate = 1e-2;
    cfg.lambda = 10.0;
    cfg.seed = 2;
    const auto net = train(parse_architecture("6x2,6x2"), 2.0, data, cfg);
    CHECK(sat_rate(net, data) >= 0.99);
}

TEST_CASE("metrics on degenerate networks") {
    Dataset data;
    data.inputs = Matrix::Random(2, 100);
    data.classes = 10;
    for (int i = 0; i < 100; ++i) data.labels.push_back(i % 10);
    data.input_bounds = Box::uniform(2, -1, 1);
    auto net = SDNetwork::initialize(2, parse_architecture("3x2"), 10, 2.0, data.input_bounds, 1);
    for (auto& l : net.layers) {
        l.weights.setZero();
        l.biases.setZero();
    }
    CHECK(accuracy(net, data) == Catch::Approx(0.1));
    CHECK(sat_rate(net, data) == 0.0);
}

TEST_CASE("invalid configurations are refused") {
    TrainConfig cfg;
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), ContractViolation);
    cfg = TrainConfig{};
    cfg.lambda = -1;
    CHECK_THROWS_AS(cfg.validate(), ContractViolation);
    CHECK(parse_loss_kind("squared_error") == LossKind::SquaredError);
    CHECK_THROWS_AS(parse_loss_kind("hinge"), std::invalid_argument);
}
