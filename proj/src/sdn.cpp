#include "sdnv/sdn.hpp"

#include <cctype>
#include <cmath>
#include <random>
#include <sstream>

namespace sdnv {

std::string to_string(const ActivationPattern& pattern) {
    std::ostringstream out;
    out << '[';
    for (std::size_t h = 0; h < pattern.size(); ++h) {
        if (h) out << ',';
        out << '[';
        if (pattern[h].active) out << *pattern[h].active; else out << '-';
        out << ',';
        if (pattern[h].inactive) out << *pattern[h].inactive; else out << '-';
        out << ']';
    }
    out << ']';
    return out.str();
}

ActivationPattern parse_pattern(const std::string& text) {
    ActivationPattern out;
    std::size_t pos = 0;
    auto fail = [&] {
        throw std::invalid_argument("malformed activation pattern: " + text);
    };
    auto skip_ws = [&] {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    };
    auto expect = [&](char c) {
        skip_ws();
        if (pos >= text.size() || text[pos] != c) fail();
        ++pos;
    };
    auto door = [&]() -> std::optional<int> {
        skip_ws();
        if (pos < text.size() && text[pos] == '-') {
            ++pos;
            return std::nullopt;
        }
        std::size_t start = pos;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
        if (start == pos) fail();
        return std::stoi(text.substr(start, pos - start));
    };
    expect('[');
    skip_ws();
    if (pos < text.size() && text[pos] == ']') return out;
    while (true) {
        expect('[');
        DoorAssignment d;
        d.active = door();
        expect(',');
        d.inactive = door();
        expect(']');
        out.push_back(d);
        skip_ws();
        if (pos < text.size() && text[pos] == ',') {
            ++pos;
            continue;
        }
        expect(']');
        break;
    }
    skip_ws();
    if (pos != text.size()) fail();
    return out;
}

std::vector<LayerShape> parse_architecture(const std::string& text) {
    std::vector<LayerShape> arch;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto x = item.find('x');
        if (x == std::string::npos) {
            throw std::invalid_argument("architecture item '" + item + "' is not <groups>x<size>");
        }
        LayerShape shape;
        try {
            std::size_t used = 0;
            shape.groups = std::stoi(item.substr(0, x), &used);
            if (used != x) throw std::invalid_argument("");
            const std::string rest = item.substr(x + 1);
            shape.group_size = std::stoi(rest, &used);
            if (used != rest.size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw std::invalid_argument("architecture item '" + item + "' is not <groups>x<size>");
        }
        if (shape.groups < 1 || shape.group_size < 1) {
            throw std::invalid_argument("architecture item '" + item + "' must be positive");
        }
        arch.push_back(shape);
    }
    return arch;
}

std::string format_architecture(const std::vector<LayerShape>& arch) {
    std::string out;
    for (std::size_t i = 0; i < arch.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(arch[i].groups) + "x" + std::to_string(arch[i].group_size);
    }
    return out;
}

std::vector<LayerShape> SDNetwork::architecture() const {
    std::vector<LayerShape> arch;
    for (int h = 0; h < hidden_layers(); ++h) arch.push_back({group_count[h], group_size[h]});
    return arch;
}

void SDNetwork::validate() const {
    if (layers.empty()) throw ContractViolation("network has no layers");
    if (group_size.size() != group_count.size() ||
        static_cast<int>(layers.size()) != hidden_layers() + 1) {
        throw ContractViolation("layer count does not match group structure");
    }
    if (!(alpha > 1.0)) throw ContractViolation("alpha must exceed 1");
    for (std::size_t h = 0; h < layers.size(); ++h) {
        const auto& m = layers[h];
        if (m.biases.size() != m.out_dim()) throw ContractViolation("bias size mismatch");
        if (h > 0 && m.in_dim() != layers[h - 1].out_dim()) {
            throw ContractViolation("layer widths do not chain");
        }
        if (m.source_layer != static_cast<int>(h) || m.target_layer != static_cast<int>(h) + 1) {
            throw ContractViolation("layer ids out of order");
        }
        if (static_cast<int>(h) < hidden_layers()) {
            if (group_size[h] < 1 || group_count[h] < 1 ||
                m.out_dim() != Eigen::Index(group_size[h]) * group_count[h]) {
                throw ContractViolation("hidden width != group_size * group_count");
            }
        }
    }
    if (output_layer().out_dim() != classes) throw ContractViolation("output width != classes");
    if (input_bounds.dim() != input_dim()) throw ContractViolation("input bounds dimension");
}

SDNetwork SDNetwork::initialize(Eigen::Index input_dim, const std::vector<LayerShape>& arch,
                                int classes, double alpha, Box input_bounds, std::uint64_t seed) {
    SDNetwork net;
    net.alpha = alpha;
    net.classes = classes;
    net.input_bounds = std::move(input_bounds);
    std::mt19937_64 rng(seed);
    Eigen::Index fan_in = input_dim;
    auto make_layer = [&](Eigen::Index width, int index) {
        const double limit = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-limit, limit);
        Matrix w(width, fan_in);
        for (Eigen::Index j = 0; j < width; ++j)
            for (Eigen::Index i = 0; i < fan_in; ++i) w(j, i) = dist(rng);
        Vector b(width);
        for (Eigen::Index j = 0; j < width; ++j) b[j] = dist(rng);
        net.layers.emplace_back(std::move(w), std::move(b), index, index + 1);
        fan_in = width;
    };
    int index = 0;
    for (const auto& shape : arch) {
        net.group_size.push_back(shape.group_size);
        net.group_count.push_back(shape.groups);
        make_layer(shape.width(), index++);
    }
    make_layer(classes, index);
    net.validate();
    return net;
}

DoorAssignment assign_doors(const Eigen::Ref<const Vector>& pre, int group_size) {
    if (group_size < 1 || pre.size() % group_size != 0) {
        throw ContractViolation("assign_doors: width not divisible by group size");
    }
    DoorAssignment doors;
    const Eigen::Index groups = pre.size() / group_size;
    for (Eigen::Index j = 0; j < groups; ++j) {
        if (doors.active && doors.inactive) break;
        const auto g = pre.segment(j * group_size, group_size);
        if (!doors.active && (g.array() > 0.0).all()) {
            doors.active = static_cast<int>(j);
        } else if (!doors.inactive && (g.array() < 0.0).all()) {
            doors.inactive = static_cast<int>(j);
        }
    }
    return doors;
}

Vector sda_slopes(Eigen::Index width, const DoorAssignment& doors, int group_size, double alpha) {
    Vector s = Vector::Ones(width);
    if (doors.active) s.segment(Eigen::Index(*doors.active) * group_size, group_size).setConstant(alpha);
    if (doors.inactive) s.segment(Eigen::Index(*doors.inactive) * group_size, group_size).setZero();
    return s;
}

Vector sda_forward(const Vector& pre, const DoorAssignment& doors, int group_size, double alpha) {
    return pre.cwiseProduct(sda_slopes(pre.size(), doors, group_size, alpha));
}

Vector softmax(const Vector& logits) {
    Vector e = (logits.array() - logits.maxCoeff()).exp();
    return e / e.sum();
}

int ForwardResult::predicted() const {
    Eigen::Index k = 0;
    logits.maxCoeff(&k);
    return static_cast<int>(k);
}

namespace {

void check_finite(const Vector& v, const char* stage) {
    if (!v.allFinite()) {
        throw TrainingDivergence(std::string("non-finite values in ") + stage);
    }
}

}  // namespace

ForwardResult forward(const SDNetwork& net, const Vector& input) {
    if (input.size() != net.input_dim()) throw ContractViolation("forward: input width");
    ForwardResult out;
    out.pattern.reserve(net.group_count.size());
    Vector a = input;
    for (int h = 0; h < net.hidden_layers(); ++h) {
        Vector z = net.layers[h].apply(a);
        check_finite(z, "hidden pre-activation");
        const DoorAssignment doors = assign_doors(z, net.group_size[h]);
        a = sda_forward(z, doors, net.group_size[h], net.alpha);
        out.pattern.push_back(doors);
    }
    out.logits = net.output_layer().apply(a);
    check_finite(out.logits, "output layer");
    return out;
}

std::vector<Vector> forward_trace(const SDNetwork& net, const Vector& input) {
    std::vector<Vector> trace;
    Vector a = input;
    for (int h = 0; h < net.hidden_layers(); ++h) {
        Vector z = net.layers[h].apply(a);
        a = sda_forward(z, assign_doors(z, net.group_size[h]), net.group_size[h], net.alpha);
        trace.push_back(std::move(z));
    }
    trace.push_back(net.output_layer().apply(a));
    return trace;
}

}  // namespace sdnv
