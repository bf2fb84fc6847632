#include "sdnv/data.hpp"

#include "sdnv/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace sdnv {

using nlohmann::json;

void Dataset::validate() const {
    if (static_cast<Eigen::Index>(labels.size()) != inputs.cols()) {
        throw ContractViolation("dataset: label count differs from sample count");
    }
    for (int y : labels) {
        if (y < 0 || y >= classes) throw ContractViolation("dataset: label out of range");
    }
    if (input_bounds.dim() != inputs.rows()) throw ContractViolation("dataset: bounds dimension");
    for (Eigen::Index i = 0; i < inputs.cols(); ++i) {
        if (!input_bounds.contains(inputs.col(i), 1e-12)) {
            throw ContractViolation("dataset: sample " + std::to_string(i) + " outside bounds");
        }
    }
}

Dataset Dataset::slice(Eigen::Index first, Eigen::Index count) const {
    Dataset out;
    out.inputs = inputs.middleCols(first, count);
    out.labels.assign(labels.begin() + first, labels.begin() + first + count);
    out.classes = classes;
    out.input_bounds = input_bounds;
    out.split = split;
    return out;
}

std::size_t IdxTensor::element_count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
}

namespace {

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t at) {
    if (at + 4 > bytes.size()) throw ParseError("IDX header truncated", bytes.size());
    return (std::uint32_t(bytes[at]) << 24) | (std::uint32_t(bytes[at + 1]) << 16) |
           (std::uint32_t(bytes[at + 2]) << 8) | std::uint32_t(bytes[at + 3]);
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(std::uint8_t(v >> 24));
    out.push_back(std::uint8_t(v >> 16));
    out.push_back(std::uint8_t(v >> 8));
    out.push_back(std::uint8_t(v));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

IdxTensor parse_idx(const std::vector<std::uint8_t>& bytes) {
    IdxTensor t;
    t.magic = read_be32(bytes, 0);
    // Magic: two zero bytes, type code 0x08 (unsigned byte), rank.
    if ((t.magic >> 16) != 0 || ((t.magic >> 8) & 0xff) != 0x08) {
        throw ParseError("bad IDX magic", 0);
    }
    const std::uint32_t rank = t.magic & 0xff;
    if (rank == 0) throw ParseError("IDX rank is zero", 3);
    std::size_t at = 4;
    for (std::uint32_t r = 0; r < rank; ++r, at += 4) t.dims.push_back(read_be32(bytes, at));
    const std::size_t expected = t.element_count();
    const std::size_t actual = bytes.size() - at;
    if (actual < expected) {
        throw ParseError("IDX payload truncated: expected " + std::to_string(expected) +
                             " bytes, found " + std::to_string(actual),
                         bytes.size());
    }
    if (actual > expected) {
        throw ParseError("IDX payload has " + std::to_string(actual - expected) + " trailing bytes",
                         at + expected);
    }
    t.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(at), bytes.end());
    return t;
}

IdxTensor load_idx(const std::filesystem::path& path) { return parse_idx(read_file(path)); }

std::vector<std::uint8_t> encode_idx(const IdxTensor& tensor) {
    if (tensor.data.size() != tensor.element_count()) {
        throw ContractViolation("encode_idx: payload size differs from dimensions");
    }
    std::vector<std::uint8_t> out;
    out.reserve(4 + 4 * tensor.dims.size() + tensor.data.size());
    put_be32(out, tensor.magic);
    for (auto d : tensor.dims) put_be32(out, d);
    out.insert(out.end(), tensor.data.begin(), tensor.data.end());
    return out;
}

void write_idx(const std::filesystem::path& path, const IdxTensor& tensor) {
    const auto bytes = encode_idx(tensor);
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

Dataset mnist_from_idx(const IdxTensor& images, const IdxTensor& labels, const std::string& split) {
    if (images.magic != kIdxImagesMagic || images.dims.size() != 3) {
        throw ParseError("expected an IDX image file (magic 0x00000803)", 0);
    }
    if (labels.magic != kIdxLabelsMagic || labels.dims.size() != 1) {
        throw ParseError("expected an IDX label file (magic 0x00000801)", 0);
    }
    if (images.dims[0] != labels.dims[0]) {
        throw ContractViolation("image and label counts differ");
    }
    const Eigen::Index n = images.dims[0];
    const Eigen::Index pixels = Eigen::Index(images.dims[1]) * images.dims[2];
    Dataset d;
    d.inputs.resize(pixels, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index p = 0; p < pixels; ++p) {
            d.inputs(p, i) = images.data[static_cast<std::size_t>(i * pixels + p)] / 255.0;
        }
    }
    d.labels.assign(labels.data.begin(), labels.data.end());
    d.classes = 10;
    d.input_bounds = Box::uniform(pixels, 0.0, 1.0);
    d.split = split;
    d.validate();
    return d;
}

Dataset load_mnist_split(const std::filesystem::path& dir, const std::string& split) {
    const std::string prefix = split == "test" ? "t10k" : "train";
    return mnist_from_idx(load_idx(dir / (prefix + "-images-idx3-ubyte")),
                          load_idx(dir / (prefix + "-labels-idx1-ubyte")), split);
}

Matrix downscale(const Matrix& images, int side, int target) {
    if (target < 1 || side % target != 0) {
        throw ContractViolation("downscale: " + std::to_string(side) + " is not divisible by " +
                                std::to_string(target));
    }
    if (images.rows() != Eigen::Index(side) * side) {
        throw ContractViolation("downscale: image size is not side*side");
    }
    const int block = side / target;
    const double count = double(block * block);
    Matrix out = Matrix::Zero(Eigen::Index(target) * target, images.cols());
    for (Eigen::Index n = 0; n < images.cols(); ++n) {
        for (int r = 0; r < side; ++r) {
            for (int c = 0; c < side; ++c) {
                out((r / block) * target + c / block, n) += images(r * side + c, n);
            }
        }
    }
    return out / count;
}

Dataset downscale(const Dataset& data, int side, int target) {
    Dataset out = data;
    out.inputs = downscale(data.inputs, side, target);
    out.input_bounds = Box(Vector::Constant(Eigen::Index(target) * target, data.input_bounds.lower.minCoeff()),
                           Vector::Constant(Eigen::Index(target) * target, data.input_bounds.upper.maxCoeff()));
    return out;
}

void Synth2DConfig::validate() const {
    if (bounds.dim() != 2) throw ContractViolation("synth2d: bounds must be 2-dimensional");
    if (!(main_lo_x < main_hi_x && main_lo_y < main_hi_y)) {
        throw ContractViolation("synth2d: main rectangle is empty");
    }
    const Vector lo = bounds.lower, hi = bounds.upper;
    if (main_lo_x < lo[0] || main_hi_x > hi[0] || main_lo_y < lo[1] || main_hi_y > hi[1]) {
        throw ContractViolation("synth2d: main rectangle leaves the bounds");
    }
    if (plant_blob) {
        if (!(blob_radius >= 0.0)) throw ContractViolation("synth2d: negative blob radius");
        if (blob_x - blob_radius < lo[0] || blob_x + blob_radius > hi[0] ||
            blob_y - blob_radius < lo[1] || blob_y + blob_radius > hi[1]) {
            throw ContractViolation("synth2d: blob leaves the bounds");
        }
        // Closest point of the rectangle to the disc center.
        const double cx = std::clamp(blob_x, main_lo_x, main_hi_x);
        const double cy = std::clamp(blob_y, main_lo_y, main_hi_y);
        if (std::hypot(cx - blob_x, cy - blob_y) <= blob_radius) {
            throw ContractViolation("synth2d: blob overlaps the main rectangle");
        }
    }
    if (uniform_points < 0 || blob_points < 0) throw ContractViolation("synth2d: negative counts");
}

bool Synth2DConfig::in_blob(double x, double y) const {
    return plant_blob && blob_radius > 0.0 && std::hypot(x - blob_x, y - blob_y) < blob_radius;
}

int Synth2DConfig::label_of(double x, double y) const {
    const bool main = x > main_lo_x && x < main_hi_x && y > main_lo_y && y < main_hi_y;
    return (main || in_blob(x, y)) ? 0 : 1;
}

Dataset gen_synth2d(const Synth2DConfig& config) {
    config.validate();
    Rng rng(config.seed);
    std::uniform_real_distribution<double> ux(config.bounds.lower[0], config.bounds.upper[0]);
    std::uniform_real_distribution<double> uy(config.bounds.lower[1], config.bounds.upper[1]);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int extra = (config.plant_blob && config.blob_radius > 0.0) ? config.blob_points : 0;
    const int n = config.uniform_points + extra;
    Dataset d;
    d.inputs.resize(2, n);
    d.labels.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double x, y;
        if (i < config.uniform_points) {
            x = ux(rng);
            y = uy(rng);
        } else {
            const double rho = config.blob_radius * std::sqrt(unit(rng));
            const double phi = 2.0 * 3.14159265358979323846 * unit(rng);
            x = config.blob_x + rho * std::cos(phi);
            y = config.blob_y + rho * std::sin(phi);
        }
        d.inputs(0, i) = x;
        d.inputs(1, i) = y;
        d.labels[static_cast<std::size_t>(i)] = config.label_of(x, y);
    }
    d.classes = 2;
    d.input_bounds = config.bounds;
    d.split = "train";
    d.validate();
    return d;
}

void save_dataset(const std::filesystem::path& path, const Dataset& data,
                  const std::string& provenance_json) {
    static_assert(std::endian::native == std::endian::little, "flat cache assumes little endian");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(data.inputs.data()),
              static_cast<std::streamsize>(sizeof(double) * data.inputs.size()));
    std::vector<std::int32_t> labels(data.labels.begin(), data.labels.end());
    out.write(reinterpret_cast<const char*>(labels.data()),
              static_cast<std::streamsize>(sizeof(std::int32_t) * labels.size()));

    json meta;
    meta["format"] = "sdnv-dataset-v1";
    meta["samples"] = data.size();
    meta["dim"] = data.dim();
    meta["classes"] = data.classes;
    meta["split"] = data.split;
    meta["input_bounds"] = {{"lower", std::vector<double>(data.input_bounds.lower.begin(), data.input_bounds.lower.end())},
                            {"upper", std::vector<double>(data.input_bounds.upper.begin(), data.input_bounds.upper.end())}};
    meta["provenance"] = json::parse(provenance_json);
    std::ofstream side(path.string() + ".json");
    side << meta.dump(2) << '\n';
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream side(path.string() + ".json");
    if (!side) throw std::runtime_error("missing sidecar " + path.string() + ".json");
    const json meta = json::parse(side);
    if (meta.value("format", "") != "sdnv-dataset-v1") throw ParseError("unknown dataset format", 0);
    const Eigen::Index n = meta.at("samples").get<Eigen::Index>();
    const Eigen::Index dim = meta.at("dim").get<Eigen::Index>();
    const auto bytes = read_file(path);
    const std::size_t want = sizeof(double) * std::size_t(n * dim) + sizeof(std::int32_t) * std::size_t(n);
    if (bytes.size() != want) {
        throw ParseError("dataset cache size " + std::to_string(bytes.size()) + " != expected " +
                             std::to_string(want),
                         std::min(bytes.size(), want));
    }
    Dataset d;
    d.inputs.resize(dim, n);
    std::memcpy(d.inputs.data(), bytes.data(), sizeof(double) * std::size_t(n * dim));
    std::vector<std::int32_t> labels(static_cast<std::size_t>(n));
    std::memcpy(labels.data(), bytes.data() + sizeof(double) * std::size_t(n * dim),
                sizeof(std::int32_t) * labels.size());
    d.labels.assign(labels.begin(), labels.end());
    d.classes = meta.at("classes").get<int>();
    d.split = meta.value("split", "train");
    const auto lo = meta.at("input_bounds").at("lower").get<std::vector<double>>();
    const auto hi = meta.at("input_bounds").at("upper").get<std::vector<double>>();
    d.input_bounds = Box(Eigen::Map<const Vector>(lo.data(), Eigen::Index(lo.size())),
                         Eigen::Map<const Vector>(hi.data(), Eigen::Index(hi.size())));
    d.validate();
    return d;
}

}  // namespace sdnv
