#pragma once

// Sliding Door Network: grouped hidden layers with the sliding door
// activation (SDA), softmax output, door-absence regularized loss and Adam
// training.

#include "sdnv/dataset.hpp"
#include "sdnv/linrules.hpp"
#include "sdnv/pattern.hpp"

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sdnv {

/// Non-finite values appeared during a forward pass or training.
class TrainingDivergence : public std::runtime_error {
public:
    TrainingDivergence(const std::string& what, int epoch = -1)
        : std::runtime_error(what), epoch_(epoch) {}
    int epoch() const { return epoch_; }

private:
    int epoch_;
};

struct LayerShape {
    int groups = 1;
    int group_size = 1;
    int width() const { return groups * group_size; }
};

/// Parses "<groups>x<group_size>[,<groups>x<group_size>]...", e.g. "16x4,12x2".
std::vector<LayerShape> parse_architecture(const std::string& text);
std::string format_architecture(const std::vector<LayerShape>& arch);

struct SDNetwork {
    /// Hidden layers first, output layer last. layers[h] maps layer h to h+1.
    std::vector<AffineMap> layers;
    std::vector<int> group_size;
    std::vector<int> group_count;
    double alpha = 2.0;
    int classes = 0;
    Box input_bounds;

    int hidden_layers() const { return static_cast<int>(group_count.size()); }
    Eigen::Index input_dim() const { return layers.front().in_dim(); }
    const AffineMap& output_layer() const { return layers.back(); }
    std::vector<LayerShape> architecture() const;

    /// Throws ContractViolation when the structural invariants fail.
    void validate() const;

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
    static SDNetwork initialize(Eigen::Index input_dim, const std::vector<LayerShape>& arch,
                                int classes, double alpha, Box input_bounds, std::uint64_t seed);
};

/// Doors of one pre-activation layer. Zero entries are neither positive nor
/// negative, so a group containing a zero never becomes a door.
DoorAssignment assign_doors(const Eigen::Ref<const Vector>& preactivations, int group_size);

/// Per-neuron SDA slope: alpha on the active door, 0 on the inactive door,
/// 1 elsewhere.
Vector sda_slopes(Eigen::Index width, const DoorAssignment& doors, int group_size, double alpha);

Vector sda_forward(const Vector& preactivations, const DoorAssignment& doors, int group_size,
                   double alpha);

Vector softmax(const Vector& logits);

struct ForwardResult {
    Vector logits;
    ActivationPattern pattern;
    int predicted() const;
    Vector probabilities() const { return softmax(logits); }
};

ForwardResult forward(const SDNetwork& net, const Vector& input);

/// Pre-activations of every hidden layer plus the logits (last entry).
std::vector<Vector> forward_trace(const SDNetwork& net, const Vector& input);

enum class LossKind { CrossEntropy, SquaredError };

struct TrainConfig {
    int epochs = 1500;
    int batch_size = 256;
    double learning_rate = 1e-3;
    double lambda = 0.01;
    LossKind loss_kind = LossKind::CrossEntropy;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;

    void validate() const;
};

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& text);

/// Door-absence penalty of one pre-activation layer, split into the part
/// charged for a missing active door and the part for a missing inactive
/// door.
struct DoorPenalty {
    double missing_active = 0.0;
    double missing_inactive = 0.0;
    double total() const { return missing_active + missing_inactive; }
};

DoorPenalty door_penalty(const Eigen::Ref<const Vector>& preactivations, int group_size);

/// Loss value with gradients laid out like SDNetwork::layers.
struct LossGradient {
    double data_loss = 0.0;
    double penalty = 0.0;  // already multiplied by lambda
    double total() const { return data_loss + penalty; }
    std::vector<Matrix> weight_grads;
    std::vector<Vector> bias_grads;
    Eigen::Index correct = 0;
    Eigen::Index both_door_layers = 0;
};

/// Batch-mean data loss plus lambda times the batch-mean door penalty.
/// Door assignments are held fixed while differentiating.
LossGradient loss_and_gradient(const SDNetwork& net, const Eigen::Ref<const Matrix>& inputs,
                               const std::vector<int>& labels, const TrainConfig& config);

double loss(const SDNetwork& net, const Dataset& batch, const TrainConfig& config);

struct EpochStats {
    int epoch = 0;
    double loss = 0.0;
    double accuracy = 0.0;
    double sat_rate = 0.0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Trains `net` in place with mini-batch Adam. Deterministic given the seed.
void train(SDNetwork& net, const Dataset& data, const TrainConfig& config,
           const EpochCallback& on_epoch = {});

SDNetwork train(const std::vector<LayerShape>& arch, double alpha, const Dataset& data,
                const TrainConfig& config, const EpochCallback& on_epoch = {});

double accuracy(const SDNetwork& net, const Dataset& data);

/// Fraction of (sample, hidden layer) pairs where both doors exist.
double sat_rate(const SDNetwork& net, const Dataset& data);

}  // namespace sdnv
