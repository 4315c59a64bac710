#pragma once

// Dense feed-forward regression network: forward pass, backpropagation,
// ADAM and a full-batch training loop with early stopping.

#include "ofr/common.hpp"
#include "ofr/data.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace ofr {

enum class Activation { relu, linear };

inline std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "linear"; }

inline Activation parse_activation(std::string_view name) {
    if (name == "relu") return Activation::relu;
    if (name == "linear") return Activation::linear;
    throw ParseError("unknown activation '" + std::string(name) + "'");
}

struct Layer {
    Matrix weights;  // out x in; weights(j, k) connects input k to neuron j
    Vector biases;   // out
    Activation activation = Activation::linear;

    Eigen::Index inputs() const { return weights.cols(); }
    Eigen::Index outputs() const { return weights.rows(); }
};

struct Network {
    std::vector<Layer> layers;

    Eigen::Index input_width() const { return layers.empty() ? 0 : layers.front().inputs(); }

    void validate() const {
        if (layers.empty()) throw std::invalid_argument("network has no layers");
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const auto& layer = layers[l];
            if (layer.biases.size() != layer.outputs())
                throw std::invalid_argument("layer " + std::to_string(l + 1) + ": bias length mismatch");
            if (l > 0 && layer.inputs() != layers[l - 1].outputs())
                throw std::invalid_argument("layer " + std::to_string(l + 1) + ": input width " +
                                            std::to_string(layer.inputs()) + " does not match previous output " +
                                            std::to_string(layers[l - 1].outputs()));
        }
    }

    bool operator==(const Network& other) const {
        if (layers.size() != other.layers.size()) return false;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const auto& a = layers[l];
            const auto& b = other.layers[l];
            if (a.activation != b.activation || a.weights.rows() != b.weights.rows() ||
                a.weights.cols() != b.weights.cols() || a.weights != b.weights || a.biases != b.biases)
                return false;
        }
        return true;
    }
};

/// Builds a network over widths[0] inputs. Weights are uniform on
/// +-sqrt(6 / fan_in); biases start at zero.
inline Network init_network(std::span<const int> widths, std::span<const Activation> activations, std::uint64_t seed) {
    if (widths.size() < 2) throw std::invalid_argument("init_network: need an input width and at least one layer");
    if (activations.size() != widths.size() - 1)
        throw std::invalid_argument("init_network: expected " + std::to_string(widths.size() - 1) +
                                    " activations, got " + std::to_string(activations.size()));
    for (int w : widths)
        if (w < 1) throw std::invalid_argument("init_network: layer widths must be >= 1");
    if (widths.back() != 1 || activations.back() != Activation::linear)
        throw std::invalid_argument("init_network: regression output must be a single linear neuron");

    std::mt19937_64 rng(seed);
    Network net;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const double limit = std::sqrt(6.0 / widths[l]);
        std::uniform_real_distribution<double> dist(-limit, limit);
        Layer layer;
        layer.weights.resize(widths[l + 1], widths[l]);
        // Fill row by row so the draw order matches the row-major text format.
        for (Eigen::Index j = 0; j < layer.weights.rows(); ++j)
            for (Eigen::Index k = 0; k < layer.weights.cols(); ++k) layer.weights(j, k) = dist(rng);
        layer.biases = Vector::Zero(widths[l + 1]);
        layer.activation = activations[l];
        net.layers.push_back(std::move(layer));
    }
    return net;
}

namespace detail {

inline void activate_inplace(Matrix& z, Activation a) {
    if (a == Activation::relu) z = z.cwiseMax(0.0);
}

inline void check_finite(const Matrix& a, std::size_t layer) {
    if (!a.allFinite()) throw std::domain_error("non-finite activation in layer " + std::to_string(layer + 1));
}

}  // namespace detail

/// Evaluates the network on a single sample.
inline double forward(const Network& net, std::span<const double> x) {
    if (static_cast<Eigen::Index>(x.size()) != net.input_width())
        throw std::invalid_argument("forward: expected " + std::to_string(net.input_width()) + " inputs, got " +
                                    std::to_string(x.size()));
    Vector a = Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size()));
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const auto& layer = net.layers[l];
        Vector z = layer.weights * a + layer.biases;
        if (layer.activation == Activation::relu) z = z.cwiseMax(0.0);
        detail::check_finite(z, l);
        a = std::move(z);
    }
    return a(0);
}

/// Batch evaluation; features is N x M, result is N predictions.
inline Vector predict(const Network& net, const Matrix& features) {
    if (features.cols() != net.input_width())
        throw std::invalid_argument("predict: expected " + std::to_string(net.input_width()) + " features, got " +
                                    std::to_string(features.cols()));
    Matrix a = features.transpose();
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const auto& layer = net.layers[l];
        Matrix z = layer.weights * a;
        z.colwise() += layer.biases;
        detail::activate_inplace(z, layer.activation);
        detail::check_finite(z, l);
        a = std::move(z);
    }
    return a.row(0).transpose();
}

enum class Loss { mae, mse };

/// Parameter-shaped tensors: gradients and ADAM moments.
struct ParamSet {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;

    static ParamSet zeros_like(const Network& net) {
        ParamSet p;
        for (const auto& layer : net.layers) {
            p.weights.push_back(Matrix::Zero(layer.weights.rows(), layer.weights.cols()));
            p.biases.push_back(Vector::Zero(layer.biases.size()));
        }
        return p;
    }

    bool matches(const Network& net) const {
        if (weights.size() != net.layers.size() || biases.size() != net.layers.size()) return false;
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            if (weights[l].rows() != net.layers[l].weights.rows() || weights[l].cols() != net.layers[l].weights.cols() ||
                biases[l].size() != net.layers[l].biases.size())
                return false;
        }
        return true;
    }
};

struct LossGradient {
    double loss = 0.0;
    ParamSet grads;
};

/// Batch-mean loss and its exact reverse-mode gradient. Subgradients use
/// sign(0) = 0 for MAE and relu'(0) = 0.
inline LossGradient loss_and_gradient(const Network& net, const Matrix& features, const Vector& targets, Loss loss) {
    const auto n = features.rows();
    if (n == 0) throw std::invalid_argument("gradient: empty batch");
    if (targets.size() != n) throw std::invalid_argument("gradient: target count mismatch");
    if (features.cols() != net.input_width())
        throw std::invalid_argument("gradient: expected " + std::to_string(net.input_width()) + " features, got " +
                                    std::to_string(features.cols()));

    const auto depth = net.layers.size();
    std::vector<Matrix> acts(depth + 1);  // acts[l] = input to layer l (column per sample)
    acts[0] = features.transpose();
    for (std::size_t l = 0; l < depth; ++l) {
        const auto& layer = net.layers[l];
        Matrix z = layer.weights * acts[l];
        z.colwise() += layer.biases;
        detail::activate_inplace(z, layer.activation);
        acts[l + 1] = std::move(z);
    }

    const double inv_n = 1.0 / static_cast<double>(n);
    Eigen::RowVectorXd residual = acts[depth].row(0) - targets.transpose();
    LossGradient out;
    Matrix delta(1, n);
    if (loss == Loss::mae) {
        out.loss = residual.cwiseAbs().sum() * inv_n;
        delta.row(0) = residual.unaryExpr([inv_n](double r) { return r > 0 ? inv_n : (r < 0 ? -inv_n : 0.0); });
    } else {
        out.loss = residual.squaredNorm() * inv_n;
        delta.row(0) = 2.0 * inv_n * residual;
    }

    out.grads.weights.resize(depth);
    out.grads.biases.resize(depth);
    for (std::size_t l = depth; l-- > 0;) {
        const auto& layer = net.layers[l];
        // A relu output is zero exactly where its pre-activation was <= 0.
        if (layer.activation == Activation::relu)
            delta = delta.cwiseProduct(acts[l + 1].unaryExpr([](double a) { return a > 0.0 ? 1.0 : 0.0; }));
        out.grads.weights[l] = delta * acts[l].transpose();
        out.grads.biases[l] = delta.rowwise().sum();
        if (l > 0) delta = layer.weights.transpose() * delta;
    }
    return out;
}

inline ParamSet gradient(const Network& net, const Matrix& features, const Vector& targets, Loss loss) {
    return loss_and_gradient(net, features, targets, loss).grads;
}

inline double batch_loss(const Network& net, const Matrix& features, const Vector& targets, Loss loss) {
    Vector residual = predict(net, features) - targets;
    return loss == Loss::mae ? residual.cwiseAbs().mean() : residual.squaredNorm() / static_cast<double>(residual.size());
}

struct TrainConfig {
    int epochs = 500;
    int patience = 0;  // 0 disables early stopping
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::uint64_t weight_init_seed = 0;

    void validate() const {
        if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
        if (patience < 0) throw std::invalid_argument("train config: patience must be >= 0");
        if (patience > 0 && patience >= epochs)
            throw std::invalid_argument("train config: patience must be smaller than epochs");
        if (!(learning_rate > 0.0)) throw std::invalid_argument("train config: learning rate must be positive");
        if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0))
            throw std::invalid_argument("train config: ADAM betas must lie in (0, 1)");
        if (!(adam_epsilon > 0.0)) throw std::invalid_argument("train config: ADAM epsilon must be positive");
    }
};

struct AdamState {
    ParamSet first_moment;
    ParamSet second_moment;
    long step_count = 0;

    static AdamState for_network(const Network& net) {
        return {ParamSet::zeros_like(net), ParamSet::zeros_like(net), 0};
    }
};

namespace detail {

template <class Param>
void adam_apply(Param& param, const Param& g, Param& m, Param& v, double b1, double b2, double step_size,
                double eps_hat) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseAbs2();
    param.array() -= step_size * m.array() / (v.array().sqrt() + eps_hat);
}

}  // namespace detail

/// In-place ADAM update with bias correction.
inline void adam_update(Network& net, const ParamSet& grads, AdamState& state, const TrainConfig& cfg) {
    if (!grads.matches(net) || !state.first_moment.matches(net) || !state.second_moment.matches(net))
        throw std::invalid_argument("adam_step: parameter shapes do not match the network");
    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double c1 = 1.0 - std::pow(cfg.adam_beta1, t);
    const double c2 = 1.0 - std::pow(cfg.adam_beta2, t);
    // lr * (m / c1) / (sqrt(v / c2) + eps) == (lr * sqrt(c2) / c1) * m / (sqrt(v) + eps * sqrt(c2))
    const double step_size = cfg.learning_rate * std::sqrt(c2) / c1;
    const double eps_hat = cfg.adam_epsilon * std::sqrt(c2);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        detail::adam_apply(net.layers[l].weights, grads.weights[l], state.first_moment.weights[l],
                           state.second_moment.weights[l], cfg.adam_beta1, cfg.adam_beta2, step_size, eps_hat);
        detail::adam_apply(net.layers[l].biases, grads.biases[l], state.first_moment.biases[l],
                           state.second_moment.biases[l], cfg.adam_beta1, cfg.adam_beta2, step_size, eps_hat);
    }
}

inline std::pair<Network, AdamState> adam_step(Network net, const ParamSet& grads, AdamState state,
                                               const TrainConfig& cfg) {
    adam_update(net, grads, state, cfg);
    return {std::move(net), std::move(state)};
}

/// Raised when training produces a non-finite loss.
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TrainReport {
    std::vector<double> train_loss_history;  // MAE of the weights each epoch's step started from
    std::vector<double> val_loss_history;    // validation MAE after each epoch's step
    int stopped_epoch = 0;
    int best_epoch = 0;
    bool early_stopped = false;
    double wall_time_seconds = 0.0;
};

struct TrainResult {
    Network net;
    TrainReport report;
};

/// Full-batch ADAM on training MAE. With a validation set, its MAE is recorded
/// every epoch; when patience > 0 and it has not strictly improved for
/// `patience` epochs, training stops and the best-epoch weights are returned.
inline TrainResult train(Network net, const Dataset& train_set, const Dataset* val_set, const TrainConfig& cfg) {
    cfg.validate();
    net.validate();
    Stopwatch clock;
    if (train_set.features.cols() != net.input_width() || (val_set && val_set->features.cols() != net.input_width()))
        throw std::invalid_argument("train: dataset width does not match network input width " +
                                    std::to_string(net.input_width()));
    if (cfg.patience > 0 && !val_set) throw std::invalid_argument("train: early stopping needs a validation set");

    TrainResult result;
    auto& report = result.report;
    report.train_loss_history.reserve(static_cast<std::size_t>(cfg.epochs));
    AdamState state = AdamState::for_network(net);
    Network best_net;
    double best_val = std::numeric_limits<double>::infinity();

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        auto step = loss_and_gradient(net, train_set.features, train_set.targets, Loss::mae);
        if (!std::isfinite(step.loss))
            throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch));
        report.train_loss_history.push_back(step.loss);
        adam_update(net, step.grads, state, cfg);
        report.stopped_epoch = epoch;

        if (!val_set) continue;
        double val = 0.0;
        try {
            val = batch_loss(net, val_set->features, val_set->targets, Loss::mae);
        } catch (const std::domain_error& e) {
            throw TrainingError(std::string("validation pass failed at epoch ") + std::to_string(epoch) + ": " +
                                e.what());
        }
        if (!std::isfinite(val)) throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch));
        report.val_loss_history.push_back(val);
        if (val < best_val) {
            best_val = val;
            report.best_epoch = epoch;
            if (cfg.patience > 0) best_net = net;
        } else if (cfg.patience > 0 && epoch - report.best_epoch >= cfg.patience) {
            report.early_stopped = true;
            net = std::move(best_net);
            break;
        }
    }
    if (!val_set) report.best_epoch = report.stopped_epoch;
    report.wall_time_seconds = clock.seconds();
    result.net = std::move(net);
    return result;
}

inline TrainResult train(Network net, const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg) {
    return train(std::move(net), train_set, &val_set, cfg);
}

// Text format:
//   ofr-network <layer count>
//   layer <inputs> <outputs> <activation>
//   <outputs lines of row-major weights>
//   <one line of biases>
inline void write_network(const Network& net, std::ostream& out) {
    out << "ofr-network " << net.layers.size() << '\n';
    for (const auto& layer : net.layers) {
        out << "layer " << layer.inputs() << ' ' << layer.outputs() << ' ' << to_string(layer.activation) << '\n';
        for (Eigen::Index j = 0; j < layer.weights.rows(); ++j) {
            for (Eigen::Index k = 0; k < layer.weights.cols(); ++k)
                out << (k ? " " : "") << format_double(layer.weights(j, k));
            out << '\n';
        }
        for (Eigen::Index j = 0; j < layer.biases.size(); ++j) out << (j ? " " : "") << format_double(layer.biases(j));
        out << '\n';
    }
}

inline Network read_network(std::istream& in) {
    auto read_number = [&in](const char* what) {
        std::string token;
        double v = 0.0;
        if (!(in >> token) || !parse_double(token, v)) throw ParseError(std::string("network: bad ") + what);
        return v;
    };
    std::string tag;
    std::size_t count = 0;
    if (!(in >> tag >> count) || tag != "ofr-network") throw ParseError("network: missing 'ofr-network' header");
    Network net;
    for (std::size_t l = 0; l < count; ++l) {
        std::string act;
        Eigen::Index inputs = 0, outputs = 0;
        if (!(in >> tag >> inputs >> outputs >> act) || tag != "layer" || inputs < 1 || outputs < 1)
            throw ParseError("network: bad header for layer " + std::to_string(l + 1));
        Layer layer;
        layer.activation = parse_activation(act);
        layer.weights.resize(outputs, inputs);
        for (Eigen::Index j = 0; j < outputs; ++j)
            for (Eigen::Index k = 0; k < inputs; ++k) layer.weights(j, k) = read_number("weight");
        layer.biases.resize(outputs);
        for (Eigen::Index j = 0; j < outputs; ++j) layer.biases(j) = read_number("bias");
        net.layers.push_back(std::move(layer));
    }
    net.validate();
    return net;
}

}  // namespace ofr
