#pragma once

#include "sdnv/dataset.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace sdnv {

/// Malformed input file; `offset` is the byte position where parsing failed.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (byte offset " + std::to_string(offset) + ")"),
          offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// Raw unsigned-byte IDX tensor.
struct IdxTensor {
    std::uint32_t magic = 0;
    std::vector<std::uint32_t> dims;
    std::vector<std::uint8_t> data;

    std::size_t element_count() const;
};

IdxTensor parse_idx(const std::vector<std::uint8_t>& bytes);
IdxTensor load_idx(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_idx(const IdxTensor& tensor);
void write_idx(const std::filesystem::path& path, const IdxTensor& tensor);

/// Images scaled to [0,1], flattened row-major, one sample per column.
Dataset mnist_from_idx(const IdxTensor& images, const IdxTensor& labels, const std::string& split);

/// Loads `<dir>/{train,t10k}-{images-idx3,labels-idx1}-ubyte`.
Dataset load_mnist_split(const std::filesystem::path& dir, const std::string& split);

/// Mean pooling of square images (one per column) from side x side to
/// target x target. The side must be divisible by the target.
Matrix downscale(const Matrix& images, int side, int target);
Dataset downscale(const Dataset& data, int side, int target);

struct Synth2DConfig {
    // Class 0 covers the main rectangle and the noise disc; class 1 the rest.
    double main_lo_x = 0.45, main_lo_y = 0.45, main_hi_x = 0.95, main_hi_y = 0.95;
    double blob_x = 0.15, blob_y = 0.15, blob_radius = 0.06;
    bool plant_blob = true;
    int uniform_points = 2000;
    int blob_points = 150;  // extra draws inside the disc so it is learnable
    std::uint64_t seed = 0;
    Box bounds = Box::uniform(2, 0.0, 1.0);

    void validate() const;
    int label_of(double x, double y) const;
    bool in_blob(double x, double y) const;
};

Dataset gen_synth2d(const Synth2DConfig& config);

/// Flat little-endian doubles (inputs, column-major) followed by int32
/// labels, with a JSON sidecar `<path>.json` describing shape and bounds.
void save_dataset(const std::filesystem::path& path, const Dataset& data,
                  const std::string& provenance_json = "{}");
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace sdnv
