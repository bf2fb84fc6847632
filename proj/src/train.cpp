#include "sdnv/sdn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace sdnv {

void TrainConfig::validate() const {
    if (epochs < 0) throw ContractViolation("epochs must be non-negative");
    if (batch_size < 1) throw ContractViolation("batch size must be at least 1");
    if (!(lambda >= 0.0)) throw ContractViolation("lambda must be non-negative");
    if (!(learning_rate > 0.0)) throw ContractViolation("learning rate must be positive");
}

std::string to_string(LossKind kind) {
    return kind == LossKind::CrossEntropy ? "cross_entropy" : "squared_error";
}

LossKind parse_loss_kind(const std::string& text) {
    if (text == "cross_entropy" || text == "ce") return LossKind::CrossEntropy;
    if (text == "squared_error" || text == "mse") return LossKind::SquaredError;
    throw std::invalid_argument("unknown loss kind '" + text + "'");
}

namespace {

// Group picked by the penalty when a door is missing: most neurons of the
// wanted sign, lowest index on ties.
Eigen::Index busiest_group(const Eigen::Ref<const Vector>& pre, int group_size, bool positive) {
    const Eigen::Index groups = pre.size() / group_size;
    Eigen::Index best = 0;
    Eigen::Index best_count = -1;
    for (Eigen::Index j = 0; j < groups; ++j) {
        const auto g = pre.segment(j * group_size, group_size).array();
        const Eigen::Index count = positive ? (g > 0.0).count() : (g < 0.0).count();
        if (count > best_count) {
            best = j;
            best_count = count;
        }
    }
    return best;
}

// Adds d(penalty)/d(pre) * weight into `grad` and returns the penalty parts.
DoorPenalty penalty_with_grad(const Eigen::Ref<const Vector>& pre, int group_size,
                              const DoorAssignment& doors, double weight,
                              Eigen::Ref<Vector> grad) {
    DoorPenalty p;
    if (!doors.active) {
        const Eigen::Index g = busiest_group(pre, group_size, true);
        for (Eigen::Index i = g * group_size; i < (g + 1) * group_size; ++i) {
            if (pre[i] < 0.0) {
                p.missing_active -= pre[i];
                grad[i] -= weight;
            }
        }
    }
    if (!doors.inactive) {
        const Eigen::Index g = busiest_group(pre, group_size, false);
        for (Eigen::Index i = g * group_size; i < (g + 1) * group_size; ++i) {
            if (pre[i] > 0.0) {
                p.missing_inactive += pre[i];
                grad[i] += weight;
            }
        }
    }
    return p;
}

}  // namespace

DoorPenalty door_penalty(const Eigen::Ref<const Vector>& pre, int group_size) {
    const DoorAssignment doors = assign_doors(pre, group_size);
    Vector scratch = Vector::Zero(pre.size());
    return penalty_with_grad(pre, group_size, doors, 0.0, scratch);
}

LossGradient loss_and_gradient(const SDNetwork& net, const Eigen::Ref<const Matrix>& inputs,
                               const std::vector<int>& labels, const TrainConfig& config) {
    const Eigen::Index batch = inputs.cols();
    if (batch == 0) throw ContractViolation("loss: empty batch");
    if (static_cast<Eigen::Index>(labels.size()) != batch) {
        throw ContractViolation("loss: label count differs from batch size");
    }
    const int hidden = net.hidden_layers();
    const double inv_batch = 1.0 / static_cast<double>(batch);

    // Forward, keeping layer inputs, SDA slopes and the penalty gradient.
    std::vector<Matrix> acts;  // acts[h] = input of layers[h]
    std::vector<Matrix> slopes;
    std::vector<Matrix> penalty_grads;
    acts.reserve(hidden + 1);
    acts.push_back(inputs);
    LossGradient out;
    double penalty_sum = 0.0;
    for (int h = 0; h < hidden; ++h) {
        const auto& layer = net.layers[h];
        Matrix z = (layer.weights * acts[h]).colwise() + layer.biases;
        if (!z.allFinite()) throw TrainingDivergence("non-finite hidden pre-activation");
        Matrix s(z.rows(), batch);
        Matrix pg = Matrix::Zero(z.rows(), batch);
        for (Eigen::Index c = 0; c < batch; ++c) {
            const DoorAssignment doors = assign_doors(z.col(c), net.group_size[h]);
            s.col(c) = sda_slopes(z.rows(), doors, net.group_size[h], net.alpha);
            if (doors.both()) ++out.both_door_layers;
            penalty_sum += penalty_with_grad(z.col(c), net.group_size[h], doors,
                                             config.lambda * inv_batch, pg.col(c))
                               .total();
        }
        acts.push_back(z.cwiseProduct(s));
        slopes.push_back(std::move(s));
        penalty_grads.push_back(std::move(pg));
    }
    const auto& top = net.output_layer();
    Matrix logits = (top.weights * acts.back()).colwise() + top.biases;
    if (!logits.allFinite()) throw TrainingDivergence("non-finite logits");

    Matrix dlogits(logits.rows(), batch);
    double data = 0.0;
    for (Eigen::Index c = 0; c < batch; ++c) {
        const Vector p = softmax(logits.col(c));
        const int y = labels[c];
        Eigen::Index arg = 0;
        logits.col(c).maxCoeff(&arg);
        if (arg == y) ++out.correct;
        if (config.loss_kind == LossKind::CrossEntropy) {
            data -= std::log(std::max(p[y], 1e-300));
            Vector g = p;
            g[y] -= 1.0;
            dlogits.col(c) = g * inv_batch;
        } else {
            Vector diff = p;
            diff[y] -= 1.0;
            data += diff.squaredNorm();
            const Vector dp = 2.0 * diff;
            dlogits.col(c) = (p.array() * (dp.array() - p.dot(dp))).matrix() * inv_batch;
        }
    }
    out.data_loss = data * inv_batch;
    out.penalty = config.lambda * penalty_sum * inv_batch;

    // Backward.
    const std::size_t n_layers = net.layers.size();
    out.weight_grads.resize(n_layers);
    out.bias_grads.resize(n_layers);
    Matrix delta = std::move(dlogits);
    for (std::size_t l = n_layers; l-- > 0;) {
        out.weight_grads[l] = delta * acts[l].transpose();
        out.bias_grads[l] = delta.rowwise().sum();
        if (l == 0) break;
        Matrix upstream = net.layers[l].weights.transpose() * delta;
        delta = upstream.cwiseProduct(slopes[l - 1]) + penalty_grads[l - 1];
    }
    return out;
}

double loss(const SDNetwork& net, const Dataset& batch, const TrainConfig& config) {
    return loss_and_gradient(net, batch.inputs, batch.labels, config).total();
}

namespace {

struct AdamState {
    std::vector<Matrix> mw, vw;
    std::vector<Vector> mb, vb;
    long step = 0;

    explicit AdamState(const SDNetwork& net) {
        for (const auto& layer : net.layers) {
            mw.push_back(Matrix::Zero(layer.weights.rows(), layer.weights.cols()));
            vw.push_back(mw.back());
            mb.push_back(Vector::Zero(layer.biases.size()));
            vb.push_back(mb.back());
        }
    }

    void apply(SDNetwork& net, const LossGradient& g, const TrainConfig& cfg) {
        ++step;
        const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
        const double lr = cfg.learning_rate * std::sqrt(c2) / c1;
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            mw[l] = cfg.beta1 * mw[l] + (1.0 - cfg.beta1) * g.weight_grads[l];
            vw[l] = cfg.beta2 * vw[l] + (1.0 - cfg.beta2) * g.weight_grads[l].cwiseAbs2();
            mb[l] = cfg.beta1 * mb[l] + (1.0 - cfg.beta1) * g.bias_grads[l];
            vb[l] = cfg.beta2 * vb[l] + (1.0 - cfg.beta2) * g.bias_grads[l].cwiseAbs2();
            net.layers[l].weights.array() -=
                lr * mw[l].array() / (vw[l].array().sqrt() + cfg.adam_eps);
            net.layers[l].biases.array() -=
                lr * mb[l].array() / (vb[l].array().sqrt() + cfg.adam_eps);
        }
    }
};

}  // namespace

void train(SDNetwork& net, const Dataset& data, const TrainConfig& config,
           const EpochCallback& on_epoch) {
    config.validate();
    net.validate();
    if (data.size() == 0) throw ContractViolation("train: empty dataset");
    if (data.dim() != net.input_dim()) throw ContractViolation("train: input width mismatch");

    std::mt19937_64 rng(config.seed ^ 0x5d0a5d0a5d0a5d0aULL);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(data.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    AdamState adam(net);
    const Eigen::Index batch = std::min<Eigen::Index>(config.batch_size, data.size());
    Matrix xb(data.dim(), batch);
    std::vector<int> yb;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        Eigen::Index correct = 0;
        Eigen::Index both = 0;
        for (Eigen::Index start = 0; start < data.size(); start += batch) {
            const Eigen::Index count = std::min(batch, data.size() - start);
            xb.resize(data.dim(), count);
            yb.resize(static_cast<std::size_t>(count));
            for (Eigen::Index c = 0; c < count; ++c) {
                const Eigen::Index idx = order[static_cast<std::size_t>(start + c)];
                xb.col(c) = data.inputs.col(idx);
                yb[static_cast<std::size_t>(c)] = data.labels[static_cast<std::size_t>(idx)];
            }
            LossGradient g;
            try {
                g = loss_and_gradient(net, xb, yb, config);
            } catch (const TrainingDivergence& e) {
                throw TrainingDivergence(std::string(e.what()) + " at epoch " +
                                             std::to_string(epoch), epoch);
            }
            if (!std::isfinite(g.total())) {
                throw TrainingDivergence("non-finite loss at epoch " + std::to_string(epoch), epoch);
            }
            loss_sum += g.total() * static_cast<double>(count);
            correct += g.correct;
            both += g.both_door_layers;
            adam.apply(net, g, config);
        }
        if (on_epoch) {
            EpochStats stats;
            stats.epoch = epoch;
            stats.loss = loss_sum / static_cast<double>(data.size());
            stats.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
            stats.sat_rate = net.hidden_layers() == 0
                                 ? 0.0
                                 : static_cast<double>(both) /
                                       static_cast<double>(data.size() * net.hidden_layers());
            on_epoch(stats);
        }
    }
}

SDNetwork train(const std::vector<LayerShape>& arch, double alpha, const Dataset& data,
                const TrainConfig& config, const EpochCallback& on_epoch) {
    SDNetwork net = SDNetwork::initialize(data.dim(), arch, data.classes, alpha,
                                          data.input_bounds, config.seed);
    train(net, data, config, on_epoch);
    return net;
}

double accuracy(const SDNetwork& net, const Dataset& data) {
    if (data.size() == 0) return 0.0;
    Eigen::Index correct = 0;
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        if (forward(net, data.inputs.col(i)).predicted() == data.labels[static_cast<std::size_t>(i)]) {
            ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

double sat_rate(const SDNetwork& net, const Dataset& data) {
    if (data.size() == 0 || net.hidden_layers() == 0) return 0.0;
    Eigen::Index both = 0;
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        for (const auto& d : forward(net, data.inputs.col(i)).pattern) both += d.both() ? 1 : 0;
    }
    return static_cast<double>(both) / static_cast<double>(data.size() * net.hidden_layers());
}

}  // namespace sdnv
