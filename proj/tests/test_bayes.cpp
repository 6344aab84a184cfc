#include <catch2/catch_amalgamated.hpp>

#include "mfnn/bayes.hpp"

using namespace mfnn;

namespace {

Observation make_obs(const Vec& data, double sigma) {
    Observation obs;
    obs.data = data;
    obs.sensors = Mat::Zero(data.size(), 2);
    for (Eigen::Index i = 0; i < data.size(); ++i)
        obs.sensors(i, 0) = static_cast<double>(i + 1) / (data.size() + 1);
    obs.noise_sigma = Vec::Constant(data.size(), sigma);
    obs.noise_level = sigma;
    return obs;
}

struct FakeEvaluator final : ForwardEvaluator {
    Vec operator()(const Vec& z) const override {
        Vec out(2);
        out[0] = z.sum();
        out[1] = z.squaredNorm();
        return out;
    }
};

}  // namespace

TEST_CASE("log prior is zero at the origin and -0.5||z||^2 elsewhere") {
    Prior prior{3};
    CHECK(log_prior(prior, Vec::Zero(3)) == 0.0);
    Vec z(3);
    z << 2.0, 0.0, 0.0;
    CHECK(log_prior(prior, z) == Catch::Approx(-2.0));
    z << 1.0, 1.0, 1.0;
    CHECK(log_prior(prior, z) == Catch::Approx(-1.5));
}

TEST_CASE("log prior is symmetric under sign flips") {
    Prior prior{4};
    Rng rng(11);
    std::normal_distribution<double> gauss;
    for (int t = 0; t < 20; ++t) {
        Vec z(4);
        for (int i = 0; i < 4; ++i) z[i] = gauss(rng);
        CHECK(log_prior(prior, z) == Catch::Approx(log_prior(prior, -z)));
    }
}

TEST_CASE("log prior rejects wrong dimension") {
    Prior prior{3};
    CHECK_THROWS_AS(log_prior(prior, Vec::Zero(2)), ShapeError);
}

TEST_CASE("prior samples have unit variance per coordinate") {
    Prior prior{2};
    Rng rng(5);
    double sum = 0, sumsq = 0;
    const int n = 20000;
    for (int t = 0; t < n; ++t) {
        Vec z = sample_prior(prior, rng);
        REQUIRE(z.size() == 2);
        sum += z[0];
        sumsq += z[0] * z[0];
    }
    double mean = sum / n;
    double var = sumsq / n - mean * mean;
    CHECK(std::abs(mean) < 0.03);
    CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("log likelihood is zero for an exact match") {
    Vec d(3);
    d << 1.0, -2.0, 0.5;
    auto obs = make_obs(d, 0.1);
    CHECK(log_likelihood(obs, d) == 0.0);
}

TEST_CASE("log likelihood matches the quadratic misfit") {
    Vec d(2);
    d << 1.0, 2.0;
    auto obs = make_obs(d, 1.0);
    Vec pred(2);
    pred << 2.0, 2.0;  // one unit residual
    CHECK(log_likelihood(obs, pred) == Catch::Approx(-0.5));
    // halving sigma scales the misfit by 4
    auto tight = make_obs(d, 0.5);
    CHECK(log_likelihood(tight, pred) == Catch::Approx(-2.0));
}

TEST_CASE("log likelihood handles per-sensor noise levels") {
    Vec d(2);
    d << 0.0, 0.0;
    auto obs = make_obs(d, 1.0);
    obs.noise_sigma[1] = 2.0;
    Vec pred(2);
    pred << 1.0, 2.0;
    // -0.5 * (1^2/1 + 2^2/4) = -1
    CHECK(log_likelihood(obs, pred) == Catch::Approx(-1.0));
}

TEST_CASE("log likelihood refuses zero noise") {
    Vec d = Vec::Zero(2);
    auto obs = make_obs(d, 0.0);
    CHECK_THROWS_AS(log_likelihood(obs, d), ConfigError);
}

TEST_CASE("log posterior is the sum of likelihood and prior") {
    Prior prior{3};
    Vec d(2);
    d << 0.7, 1.3;
    auto obs = make_obs(d, 0.2);
    FakeEvaluator eval;
    LogPosterior post{prior, obs, eval};
    Rng rng(23);
    std::normal_distribution<double> gauss;
    for (int t = 0; t < 20; ++t) {
        Vec z(3);
        for (int i = 0; i < 3; ++i) z[i] = gauss(rng);
        double expected = log_likelihood(obs, eval(z)) + log_prior(prior, z);
        CHECK(post(z) == Catch::Approx(expected));
    }
}

TEST_CASE("log posterior decreases away from a perfectly fit origin") {
    // data chosen so z = 0 reproduces it exactly; posterior then peaks at 0
    Prior prior{2};
    Vec d(2);
    d << 0.0, 0.0;
    auto obs = make_obs(d, 0.3);
    FakeEvaluator eval;
    LogPosterior post{prior, obs, eval};
    double at_zero = post(Vec::Zero(2));
    Rng rng(7);
    std::normal_distribution<double> gauss;
    for (int t = 0; t < 25; ++t) {
        Vec z(2);
        z << gauss(rng), gauss(rng);
        if (z.norm() < 1e-6) continue;
        CHECK(post(z) < at_zero);
    }
}

TEST_CASE("high fidelity evaluator drives the solver counter") {
    RbfFieldParam field;
    ForwardProblem problem(Grid(15), field, default_sensor_grid());
    HighFidelityEvaluator eval{problem};
    CHECK(problem.evals() == 0);
    Vec out = eval(Vec::Zero(9));
    CHECK(out.size() == 81);
    CHECK(problem.evals() == 1);
    eval(Vec::Zero(9));
    CHECK(problem.evals() == 2);
}
