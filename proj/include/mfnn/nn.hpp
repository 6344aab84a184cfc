#pragma once

#include "mfnn/common.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace mfnn {

enum class Activation { Swish };

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

inline double swish(double x) { return x * sigmoid(x); }

inline double dswish(double x) {
    double s = sigmoid(x);
    return s * (1.0 + x * (1.0 - s));
}

struct Network {
    std::vector<int> dims;           // d_0 .. d_{L+1}
    std::vector<Mat> weights;        // W^(k): dims[k+1] x dims[k]
    std::vector<Vec> biases;         // b^(k): dims[k+1]
    Activation activation = Activation::Swish;

    int input_dim() const { return dims.front(); }
    int output_dim() const { return dims.back(); }
    int layer_count() const { return static_cast<int>(weights.size()); }

    void check_consistent() const {
        require_shape(dims.size() >= 2, "network needs at least input and output dims");
        require_shape(weights.size() == dims.size() - 1 && biases.size() == weights.size(),
                      "network layer count mismatch");
        for (std::size_t k = 0; k < weights.size(); ++k) {
            require_shape(weights[k].rows() == dims[k + 1] && weights[k].cols() == dims[k],
                          "weight matrix shape mismatch at layer " + std::to_string(k));
            require_shape(biases[k].size() == dims[k + 1],
                          "bias vector shape mismatch at layer " + std::to_string(k));
            require_shape(all_finite(weights[k]) && all_finite(biases[k]),
                          "non-finite network parameters at layer " + std::to_string(k));
        }
    }
};

struct TrainConfig {
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double regularization = 0.0;
    int batch_size = 32;
    int epochs = 5000;
    std::uint64_t rng_seed = 0;

    void validate() const {
        require(learning_rate > 0, "learning_rate must be positive");
        require(adam_beta1 >= 0 && adam_beta1 < 1, "adam_beta1 must be in [0,1)");
        require(adam_beta2 >= 0 && adam_beta2 < 1, "adam_beta2 must be in [0,1)");
        require(regularization >= 0, "regularization must be nonnegative");
        require(batch_size >= 1, "batch_size must be positive");
        require(epochs >= 0, "epochs must be nonnegative");
    }
};

struct TrainingSet {
    Mat inputs;   // N x d_0
    Mat targets;  // N x d_out

    int size() const { return static_cast<int>(inputs.rows()); }

    void check(const Network& net) const {
        require_shape(inputs.rows() >= 1, "training set is empty");
        require_shape(inputs.rows() == targets.rows(),
                      "training inputs and targets row counts differ");
        require_shape(all_finite(inputs) && all_finite(targets),
                      "training set contains non-finite values");
        require_shape(inputs.cols() == net.input_dim(),
                      "training input width " + std::to_string(inputs.cols()) +
                          " does not match network input dim " + std::to_string(net.input_dim()));
        require_shape(targets.cols() == net.output_dim(),
                      "training target width " + std::to_string(targets.cols()) +
                          " does not match network output dim " + std::to_string(net.output_dim()));
    }
};

// Columns are samples. Pre-activations are kept for backprop.
namespace detail {
struct ForwardTrace {
    std::vector<Mat> activations;  // a^(0) .. a^(L); layer inputs
    std::vector<Mat> pre;          // pre-activation of hidden layers
    Mat output;
};

inline ForwardTrace forward_batch(const Network& net, const Mat& X) {
    ForwardTrace tr;
    Mat a = X;
    int L = net.layer_count();
    tr.activations.reserve(L);
    for (int k = 0; k < L; ++k) {
        tr.activations.push_back(a);
        Mat z = (net.weights[k] * a).colwise() + net.biases[k];
        if (k + 1 < L) {
            tr.pre.push_back(z);
            a = z.unaryExpr([](double v) { return swish(v); });
        } else {
            a = z;
        }
    }
    tr.output = a;
    return tr;
}
}  // namespace detail

inline Vec forward(const Network& net, const Vec& z) {
    require_shape(z.size() == net.input_dim(),
                  "forward: expected input of length " + std::to_string(net.input_dim()) +
                      ", got " + std::to_string(z.size()));
    Vec a = z;
    int L = net.layer_count();
    for (int k = 0; k < L; ++k) {
        Vec h = net.weights[k] * a + net.biases[k];
        if (k + 1 < L)
            a = h.unaryExpr([](double v) { return swish(v); });
        else
            a = h;
    }
    return a;
}

inline double parameter_norm_sq(const Network& net) {
    double s = 0.0;
    for (const Mat& W : net.weights) s += W.squaredNorm();
    for (const Vec& b : net.biases) s += b.squaredNorm();
    return s;
}

inline double loss(const Network& net, const TrainingSet& batch, double lambda) {
    batch.check(net);
    detail::ForwardTrace tr = detail::forward_batch(net, batch.inputs.transpose());
    double mse = (tr.output - batch.targets.transpose()).squaredNorm() / batch.size();
    return mse + lambda * parameter_norm_sq(net);
}

struct Gradients {
    std::vector<Mat> dW;
    std::vector<Vec> db;
};

inline Gradients gradient(const Network& net, const TrainingSet& batch, double lambda) {
    batch.check(net);
    int L = net.layer_count();
    int N = batch.size();
    detail::ForwardTrace tr = detail::forward_batch(net, batch.inputs.transpose());

    Gradients g;
    g.dW.resize(L);
    g.db.resize(L);
    Mat delta = 2.0 * (tr.output - batch.targets.transpose()) / N;
    for (int k = L - 1; k >= 0; --k) {
        g.dW[k] = delta * tr.activations[k].transpose() + 2.0 * lambda * net.weights[k];
        g.db[k] = delta.rowwise().sum() + 2.0 * lambda * net.biases[k];
        if (k > 0) {
            Mat dact = tr.pre[k - 1].unaryExpr([](double v) { return dswish(v); });
            delta = (net.weights[k].transpose() * delta).cwiseProduct(dact);
        }
    }
    return g;
}

inline Network make_network(const std::vector<int>& dims, std::uint64_t seed,
                            Activation act = Activation::Swish) {
    require_shape(dims.size() >= 2, "make_network needs at least two dims");
    for (int d : dims) require_shape(d >= 1, "network dims must be positive");
    Network net;
    net.dims = dims;
    net.activation = act;
    Rng rng(seed);
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
        double bound = std::sqrt(6.0 / (dims[k] + dims[k + 1]));
        std::uniform_real_distribution<double> u(-bound, bound);
        Mat W(dims[k + 1], dims[k]);
        for (Eigen::Index i = 0; i < W.rows(); ++i)
            for (Eigen::Index j = 0; j < W.cols(); ++j) W(i, j) = u(rng);
        net.weights.push_back(std::move(W));
        net.biases.push_back(Vec::Zero(dims[k + 1]));
    }
    net.check_consistent();
    return net;
}

struct TrainResult {
    Network net;
    std::vector<double> epoch_losses;  // full-set loss after each epoch
};

inline TrainResult train(Network net, const TrainingSet& data, const TrainConfig& cfg) {
    cfg.validate();
    data.check(net);
    int N = data.size();
    int B = std::min(cfg.batch_size, N);
    int L = net.layer_count();

    std::vector<Mat> mW(L), vW(L);
    std::vector<Vec> mb(L), vb(L);
    for (int k = 0; k < L; ++k) {
        mW[k] = Mat::Zero(net.weights[k].rows(), net.weights[k].cols());
        vW[k] = mW[k];
        mb[k] = Vec::Zero(net.biases[k].size());
        vb[k] = mb[k];
    }

    Rng rng(cfg.rng_seed);
    std::vector<int> order(N);
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    result.epoch_losses.reserve(cfg.epochs);
    long t = 0;
    Mat Xb(B, net.input_dim()), Yb(B, net.output_dim());
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (int start = 0; start < N; start += B) {
            int n = std::min(B, N - start);
            TrainingSet batch;
            batch.inputs = Mat(n, net.input_dim());
            batch.targets = Mat(n, net.output_dim());
            for (int i = 0; i < n; ++i) {
                batch.inputs.row(i) = data.inputs.row(order[start + i]);
                batch.targets.row(i) = data.targets.row(order[start + i]);
            }
            Gradients g = gradient(net, batch, cfg.regularization);
            ++t;
            double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(t));
            double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(t));
            for (int k = 0; k < L; ++k) {
                mW[k] = cfg.adam_beta1 * mW[k] + (1.0 - cfg.adam_beta1) * g.dW[k];
                vW[k] = cfg.adam_beta2 * vW[k] + (1.0 - cfg.adam_beta2) * g.dW[k].cwiseProduct(g.dW[k]);
                net.weights[k] -= cfg.learning_rate *
                                  ((mW[k] / c1).array() / ((vW[k] / c2).array().sqrt() + cfg.adam_epsilon))
                                      .matrix();
                mb[k] = cfg.adam_beta1 * mb[k] + (1.0 - cfg.adam_beta1) * g.db[k];
                vb[k] = cfg.adam_beta2 * vb[k] + (1.0 - cfg.adam_beta2) * g.db[k].cwiseProduct(g.db[k]);
                net.biases[k] -= cfg.learning_rate *
                                 ((mb[k] / c1).array() / ((vb[k] / c2).array().sqrt() + cfg.adam_epsilon))
                                     .matrix();
            }
        }
        for (int k = 0; k < L; ++k) {
            if (!all_finite(net.weights[k]) || !all_finite(net.biases[k]))
                throw NumericError("training diverged at epoch " + std::to_string(epoch));
        }
        result.epoch_losses.push_back(loss(net, data, cfg.regularization));
    }
    result.net = std::move(net);
    return result;
}

// Flat text format: "dims: d_0 ... d_{L+1}" then one block per layer with
// row-major weight entries followed by bias entries, one value per line.
inline void write_network(std::ostream& os, const Network& net) {
    net.check_consistent();
    os << "dims:";
    for (int d : net.dims) os << ' ' << d;
    os << '\n';
    for (int k = 0; k < net.layer_count(); ++k) {
        const Mat& W = net.weights[k];
        for (Eigen::Index i = 0; i < W.rows(); ++i)
            for (Eigen::Index j = 0; j < W.cols(); ++j) os << str17(W(i, j)) << '\n';
        const Vec& b = net.biases[k];
        for (Eigen::Index i = 0; i < b.size(); ++i) os << str17(b[i]) << '\n';
    }
}

inline Network read_network(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw IoError("network stream is empty");
    std::istringstream header(line);
    std::string tag;
    header >> tag;
    if (tag != "dims:") throw IoError("expected 'dims:' header, got '" + tag + "'");
    Network net;
    int d;
    while (header >> d) net.dims.push_back(d);
    if (net.dims.size() < 2) throw IoError("network header needs at least two dims");
    auto next_value = [&is, &line]() {
        if (!std::getline(is, line)) throw IoError("truncated network stream");
        return parse_double(trim(line));
    };
    for (std::size_t k = 0; k + 1 < net.dims.size(); ++k) {
        Mat W(net.dims[k + 1], net.dims[k]);
        for (Eigen::Index i = 0; i < W.rows(); ++i)
            for (Eigen::Index j = 0; j < W.cols(); ++j) W(i, j) = next_value();
        Vec b(net.dims[k + 1]);
        for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = next_value();
        net.weights.push_back(std::move(W));
        net.biases.push_back(std::move(b));
    }
    net.check_consistent();
    return net;
}

}  // namespace mfnn
