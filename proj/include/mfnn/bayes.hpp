#pragma once

#include "mfnn/common.hpp"
#include "mfnn/pde.hpp"

namespace mfnn {

struct Prior {
    int n = 0;  // i.i.d. standard-normal components

    explicit Prior(int dim) : n(dim) { require(n >= 1, "prior dimension must be positive"); }
};

inline Vec sample_prior(const Prior& prior, Rng& rng) {
    std::normal_distribution<double> gauss;
    Vec z(prior.n);
    for (int i = 0; i < prior.n; ++i) z[i] = gauss(rng);
    return z;
}

inline double log_prior(const Prior& prior, const Vec& z) {
    require_shape(z.size() == prior.n, "log_prior: expected dimension " + std::to_string(prior.n) +
                                           ", got " + std::to_string(z.size()));
    return -0.5 * z.squaredNorm();
}

inline double log_likelihood(const Observation& obs, const Vec& prediction) {
    obs.validate_for_inference();
    require_shape(prediction.size() == obs.data.size(),
                  "log_likelihood: prediction length " + std::to_string(prediction.size()) +
                      " does not match data length " + std::to_string(obs.data.size()));
    Vec r = (obs.data - prediction).array() / obs.noise_sigma.array();
    return -0.5 * r.squaredNorm();
}

struct ForwardEvaluator {
    virtual ~ForwardEvaluator() = default;
    virtual Vec operator()(const Vec& z) const = 0;
};

struct HighFidelityEvaluator final : ForwardEvaluator {
    const ForwardProblem& problem;
    explicit HighFidelityEvaluator(const ForwardProblem& p) : problem(p) {}
    Vec operator()(const Vec& z) const override { return forward_map(problem, z); }
};

struct LogPosterior {
    const Prior& prior;
    const Observation& observation;
    const ForwardEvaluator& evaluator;

    double operator()(const Vec& z) const {
        return log_likelihood(observation, evaluator(z)) + log_prior(prior, z);
    }
};

}  // namespace mfnn
