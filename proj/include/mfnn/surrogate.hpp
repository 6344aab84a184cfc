#pragma once

#include "mfnn/bayes.hpp"
#include "mfnn/nn.hpp"

#include <functional>
#include <istream>
#include <ostream>

namespace mfnn {

struct StandardizedNet {
    Network net;
    Standardizer input;
    Standardizer output;

    Vec predict(const Vec& x) const { return output.inverse(forward(net, input.forward(x))); }
};

struct FitResult {
    StandardizedNet model;
    std::vector<double> epoch_losses;  // standardized-space losses per epoch
    double initial_loss = 0.0;
};

inline FitResult fit_standardized(const Mat& X, const Mat& Y, const std::vector<int>& hidden,
                                  const TrainConfig& cfg) {
    require_shape(X.rows() == Y.rows() && X.rows() >= 1, "fit needs matching nonempty X and Y");
    StandardizedNet sn;
    sn.input = Standardizer::fit(X);
    sn.output = Standardizer::fit(Y);

    TrainingSet ts;
    ts.inputs = Mat(X.rows(), X.cols());
    ts.targets = Mat(Y.rows(), Y.cols());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        ts.inputs.row(i) = sn.input.forward(X.row(i).transpose()).transpose();
        ts.targets.row(i) = sn.output.forward(Y.row(i).transpose()).transpose();
    }

    std::vector<int> dims;
    dims.push_back(static_cast<int>(X.cols()));
    for (int hdim : hidden) dims.push_back(hdim);
    dims.push_back(static_cast<int>(Y.cols()));
    Network net = make_network(dims, cfg.rng_seed ^ 0x517cc1b727220a95ULL);

    FitResult out;
    out.initial_loss = loss(net, ts, cfg.regularization);
    TrainResult tr = train(std::move(net), ts, cfg);
    sn.net = std::move(tr.net);
    out.model = std::move(sn);
    out.epoch_losses = std::move(tr.epoch_losses);
    return out;
}

// A stack of standardized networks: entry 0 is the prior-trained base and
// every further entry is a correction head taking (z, previous prediction).
// Prediction never touches the high-fidelity solver.
struct SurrogateModel {
    std::vector<StandardizedNet> stack;
    int input_dim = 0;
    int output_dim = 0;
    // Local (z, f^H) pairs accumulated by refinements; feeds the pooled and
    // refit-head training modes. Not serialized.
    std::vector<std::pair<Vec, Vec>> local_pool;

    int depth() const { return static_cast<int>(stack.size()) - 1; }

    Vec predict(const Vec& z) const {
        require_shape(!stack.empty(), "surrogate has no trained networks");
        require_shape(z.size() == input_dim, "surrogate input dimension mismatch: expected " +
                                                 std::to_string(input_dim) + ", got " +
                                                 std::to_string(z.size()));
        Vec y = stack.front().predict(z);
        Vec xy(input_dim + output_dim);
        for (std::size_t k = 1; k < stack.size(); ++k) {
            xy.head(input_dim) = z;
            xy.tail(output_dim) = y;
            y = stack[k].predict(xy);
        }
        return y;
    }
};

struct SurrogateEvaluator final : ForwardEvaluator {
    const SurrogateModel& model;
    explicit SurrogateEvaluator(const SurrogateModel& m) : model(m) {}
    Vec operator()(const Vec& z) const override { return model.predict(z); }
};

struct OfflineBuild {
    SurrogateModel model;
    Mat inputs;   // the N prior draws, one per row
    Mat outputs;  // matching high-fidelity observations
    std::vector<double> epoch_losses;
};

inline OfflineBuild build_low_fidelity(const ForwardProblem& problem, const Prior& prior, int N,
                                       const std::vector<int>& arch, const TrainConfig& cfg,
                                       std::uint64_t sample_seed) {
    require(N >= 2, "build_low_fidelity needs N >= 2");
    Rng rng(sample_seed);
    OfflineBuild out;
    out.inputs = Mat(N, prior.n);
    out.outputs = Mat(N, problem.sensors.rows());
    for (int i = 0; i < N; ++i) {
        Vec z = sample_prior(prior, rng);
        out.inputs.row(i) = z.transpose();
        out.outputs.row(i) = forward_map(problem, z).transpose();
    }
    FitResult fit = fit_standardized(out.inputs, out.outputs, arch, cfg);
    out.model.input_dim = prior.n;
    out.model.output_dim = static_cast<int>(out.outputs.cols());
    out.model.stack.push_back(std::move(fit.model));
    out.epoch_losses = std::move(fit.epoch_losses);
    return out;
}

struct LocalBall {
    Vec center;
    double radius = 0.2;  // max-norm radius

    LocalBall(Vec c, double r) : center(std::move(c)), radius(r) {
        require(radius > 0, "local ball radius must be positive");
    }
};

// Componentwise uniform draws from the max-norm ball (a product of intervals).
inline Mat sample_ball(const LocalBall& ball, int Q, Rng& rng) {
    std::uniform_real_distribution<double> u(-ball.radius, ball.radius);
    Mat samples(Q, ball.center.size());
    for (int q = 0; q < Q; ++q)
        for (Eigen::Index i = 0; i < ball.center.size(); ++i)
            samples(q, i) = ball.center[i] + u(rng);
    return samples;
}

struct RefineOptions {
    // Default: train a fresh head on the Q new local points and nest it on
    // the current model. refit_head_only retrains a single head over the
    // original base using every local point seen so far; pool_local_data
    // keeps nesting but trains each fresh head on the accumulated points.
    bool refit_head_only = false;
    bool pool_local_data = false;
};

inline SurrogateModel refine(SurrogateModel model,
                             const std::function<Vec(const Vec&)>& high_fidelity,
                             const LocalBall& ball, int Q, const std::vector<int>& head_arch,
                             TrainConfig cfg, Rng& rng, const RefineOptions& opts = {}) {
    require(Q >= 2, "refine needs Q >= 2");
    require_shape(ball.center.size() == model.input_dim, "ball center dimension mismatch");
    Mat Z = sample_ball(ball, Q, rng);
    for (int q = 0; q < Q; ++q)
        model.local_pool.emplace_back(Z.row(q).transpose(), high_fidelity(Z.row(q).transpose()));

    bool pooled = opts.refit_head_only || opts.pool_local_data;
    std::size_t first = pooled ? 0 : model.local_pool.size() - Q;
    std::size_t count = model.local_pool.size() - first;

    SurrogateModel base = model;
    if (opts.refit_head_only) base.stack.resize(1);

    Mat X(count, model.input_dim + model.output_dim);
    Mat Y(count, model.output_dim);
    for (std::size_t i = 0; i < count; ++i) {
        const auto& [z, fh] = model.local_pool[first + i];
        X.row(i).head(model.input_dim) = z.transpose();
        X.row(i).tail(model.output_dim) = base.predict(z).transpose();
        Y.row(i) = fh.transpose();
    }
    cfg.rng_seed = rng();
    FitResult fit = fit_standardized(X, Y, head_arch, cfg);
    if (opts.refit_head_only) model.stack.resize(1);
    model.stack.push_back(std::move(fit.model));
    return model;
}

inline SurrogateModel refine(SurrogateModel model, const ForwardProblem& problem,
                             const LocalBall& ball, int Q, const std::vector<int>& head_arch,
                             const TrainConfig& cfg, Rng& rng, const RefineOptions& opts = {}) {
    auto fh = [&problem](const Vec& z) { return forward_map(problem, z); };
    return refine(std::move(model), fh, ball, Q, head_arch, cfg, rng, opts);
}

namespace detail {
inline void write_transform_line(std::ostream& os, const std::string& tag, const Vec& v) {
    os << tag << ':';
    for (Eigen::Index i = 0; i < v.size(); ++i) os << ' ' << str17(v[i]);
    os << '\n';
}

inline Vec read_transform_line(std::istream& is, const std::string& tag) {
    std::string line;
    if (!std::getline(is, line)) throw IoError("surrogate stream truncated before " + tag);
    auto colon = line.find(':');
    if (colon == std::string::npos || trim(line.substr(0, colon)) != tag)
        throw IoError("expected transform line '" + tag + ":', got '" + line + "'");
    std::vector<double> vals;
    for (const auto& tok : split(trim(line.substr(colon + 1)), ' '))
        if (!trim(tok).empty()) vals.push_back(parse_double(trim(tok)));
    return Eigen::Map<Vec>(vals.data(), vals.size());
}
}  // namespace detail

inline void write_standardized_net(std::ostream& os, const StandardizedNet& sn) {
    write_network(os, sn.net);
    detail::write_transform_line(os, "input_mean", sn.input.mean);
    detail::write_transform_line(os, "input_scale", sn.input.scale);
    detail::write_transform_line(os, "output_mean", sn.output.mean);
    detail::write_transform_line(os, "output_scale", sn.output.scale);
}

inline StandardizedNet read_standardized_net(std::istream& is) {
    StandardizedNet sn;
    sn.net = read_network(is);
    sn.input.mean = detail::read_transform_line(is, "input_mean");
    sn.input.scale = detail::read_transform_line(is, "input_scale");
    sn.output.mean = detail::read_transform_line(is, "output_mean");
    sn.output.scale = detail::read_transform_line(is, "output_scale");
    require_shape(sn.input.mean.size() == sn.net.input_dim() &&
                      sn.output.mean.size() == sn.net.output_dim(),
                  "standardized network transform widths do not match the network");
    return sn;
}

inline void write_surrogate(std::ostream& os, const SurrogateModel& model) {
    os << "depth: " << model.depth() << '\n';
    for (const auto& sn : model.stack) write_standardized_net(os, sn);
}

inline SurrogateModel read_surrogate(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw IoError("surrogate stream is empty");
    auto colon = line.find(':');
    if (colon == std::string::npos || trim(line.substr(0, colon)) != "depth")
        throw IoError("expected 'depth:' header");
    long depth = parse_long(trim(line.substr(colon + 1)));
    if (depth < 0) throw IoError("surrogate depth must be nonnegative");
    SurrogateModel model;
    for (long k = 0; k <= depth; ++k) model.stack.push_back(read_standardized_net(is));
    model.input_dim = model.stack.front().net.input_dim();
    model.output_dim = model.stack.front().net.output_dim();
    for (std::size_t k = 1; k < model.stack.size(); ++k)
        require_shape(model.stack[k].net.input_dim() == model.input_dim + model.output_dim,
                      "composite head input width must be input_dim + output_dim");
    return model;
}

}  // namespace mfnn
