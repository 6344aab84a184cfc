#pragma once

#include "mfnn/surrogate.hpp"

#include <iostream>
#include <limits>
#include <ostream>

namespace mfnn {

struct ProposalSpec {
    Vec step_sigma;  // per-coordinate Gaussian random-walk scales

    static ProposalSpec isotropic(int n, double s) {
        require(s > 0, "proposal step_sigma must be positive");
        ProposalSpec p;
        p.step_sigma = Vec::Constant(n, s);
        return p;
    }

    void validate() const {
        require(step_sigma.size() >= 1 && step_sigma.minCoeff() > 0,
                "proposal step_sigma must be positive");
    }

    Vec perturb(const Vec& z, Rng& rng) const {
        require_shape(z.size() == step_sigma.size(), "proposal dimension mismatch");
        std::normal_distribution<double> gauss;
        Vec out = z;
        for (Eigen::Index i = 0; i < z.size(); ++i) out[i] += step_sigma[i] * gauss(rng);
        return out;
    }
};

struct AdaptiveConfig {
    int subchain_length = 1000;  // m
    int max_corrections = 50;    // I_max
    double tol = 0.1;
    double radius = 0.2;
    int q_local = 10;
    std::vector<int> head_arch = {50};
    TrainConfig train;
    std::uint64_t rng_seed = 0;
    RefineOptions refine_opts;
    bool indicator_ratio_flipped = false;

    void validate() const {
        require(subchain_length >= 2, "subchain_length must be >= 2");
        require(max_corrections >= 1, "max_corrections must be >= 1");
        require(tol > 0, "tol must be positive");
        require(radius > 0, "radius must be positive");
        require(q_local >= 2, "q_local must be >= 2");
    }
};

struct RefinementEvent {
    int outer_iter = 0;  // 1-based
    Vec z_tilde;
    double err = 0.0;
    bool triggered = false;
    long evals_total = 0;  // problem counter right after the check (and refine)
};

struct ChainStore {
    Mat samples;  // one row per state
    std::vector<int> iteration;
    std::vector<char> accepted;
    std::vector<int> surrogate_depth;
    long accept_count = 0;
    std::vector<RefinementEvent> events;
    long evals_before = 0;
    long evals_after = 0;

    int size() const { return static_cast<int>(samples.rows()); }
    double acceptance_rate() const {
        return size() ? static_cast<double>(accept_count) / size() : 0.0;
    }
};

inline bool accept_decision(double log_u, double delta_logpost) {
    if (std::isnan(delta_logpost)) return false;
    return log_u < std::min(0.0, delta_logpost);
}

struct StepResult {
    Vec z;
    double logpost = 0.0;
    bool accepted = false;
};

// One Gaussian random-walk MH step. Non-finite proposal density counts as
// log-density -inf and is rejected.
template <typename LogPost>
StepResult mh_step(LogPost&& lp, const Vec& current, double current_lp, const ProposalSpec& prop,
                   Rng& rng) {
    Vec zstar = prop.perturb(current, rng);
    double lpp = lp(zstar);
    if (!std::isfinite(lpp)) lpp = -std::numeric_limits<double>::infinity();
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double log_u = std::log(u(rng));
    if (accept_decision(log_u, lpp - current_lp)) return {std::move(zstar), lpp, true};
    return {current, current_lp, false};
}

template <typename LogPost>
StepResult mh_step(LogPost&& lp, const Vec& current, const ProposalSpec& prop, Rng& rng) {
    return mh_step(lp, current, lp(current), prop, rng);
}

inline double error_indicator(const Vec& f_high, const Vec& f_low) {
    require_shape(f_high.size() == f_low.size(), "error_indicator length mismatch");
    double denom = f_high.cwiseAbs().maxCoeff();
    if (denom <= 0.0)
        throw NumericError("error indicator is undefined: high-fidelity output is all zero");
    return (f_high - f_low).cwiseAbs().maxCoeff() / denom;
}

struct SelectResult {
    Vec z_tilde;
    Vec f_high;          // cached high-fidelity output at z_tilde
    double log_post = 0.0;  // high-fidelity log-posterior at z_tilde
    bool chose_minus = false;
};

// Picks the refinement point from {z-, z+} with the high-fidelity ratio
// beta = min{1, post(z-) / post(z+)}, z- in the numerator; s < beta selects
// z-. Exactly two high-fidelity evaluations. The flipped flag tests the
// conventional orientation (proposal in the numerator, s < beta selects z+).
template <typename FH>
SelectResult refinement_select(FH&& f_high, const Observation& obs, const Prior& prior,
                               const Vec& z_minus, const Vec& z_plus, Rng& rng,
                               bool flipped = false) {
    require_shape(all_finite(z_minus) && all_finite(z_plus),
                  "refinement_select needs finite points");
    Vec fm = f_high(z_minus);
    Vec fp = f_high(z_plus);
    double lp_minus = log_likelihood(obs, fm) + log_prior(prior, z_minus);
    double lp_plus = log_likelihood(obs, fp) + log_prior(prior, z_plus);
    double log_beta = flipped ? std::min(0.0, lp_plus - lp_minus) : std::min(0.0, lp_minus - lp_plus);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    bool first_branch = std::log(u(rng)) < log_beta;
    bool pick_minus = flipped ? !first_branch : first_branch;
    if (pick_minus) return {z_minus, std::move(fm), lp_minus, true};
    return {z_plus, std::move(fp), lp_plus, false};
}

// Plain MH chain on a fixed log-posterior (direct and prior-surrogate runs).
// The start state is the first recorded sample, so a chain of `steps` states
// costs exactly `steps` posterior evaluations.
template <typename LogPost>
ChainStore run_chain(LogPost&& lp, const Vec& z0, long steps, const ProposalSpec& proposal,
                     std::uint64_t seed, int depth_label = 0) {
    proposal.validate();
    require(steps >= 1, "chain needs at least one step");
    Rng rng(seed);
    ChainStore store;
    store.samples = Mat(steps, z0.size());
    store.iteration.reserve(steps);
    store.accepted.reserve(steps);
    store.surrogate_depth.reserve(steps);
    Vec z = z0;
    double cur = lp(z0);
    store.samples.row(0) = z.transpose();
    store.iteration.push_back(1);
    store.accepted.push_back(0);
    store.surrogate_depth.push_back(depth_label);
    for (long i = 1; i < steps; ++i) {
        StepResult step = mh_step(lp, z, cur, proposal, rng);
        z = step.z;
        cur = step.logpost;
        store.samples.row(i) = z.transpose();
        store.iteration.push_back(static_cast<int>(i + 1));
        store.accepted.push_back(step.accepted ? 1 : 0);
        store.surrogate_depth.push_back(depth_label);
        if (step.accepted) ++store.accept_count;
    }
    return store;
}

struct AdaptiveResult {
    ChainStore store;
    SurrogateModel model;
};

// Outer loop: m-1 surrogate steps, one high-fidelity check of the proposed
// move, a local refinement when the surrogate misfit exceeds tol, then the
// delayed accept/reject of the proposal under the (possibly updated)
// surrogate. High-fidelity cost per iteration: 2 solves plus Q per trigger.
inline AdaptiveResult adaptive_run(const ForwardProblem& problem, const Observation& obs,
                                   const Prior& prior, SurrogateModel model,
                                   const ProposalSpec& proposal, const AdaptiveConfig& cfg,
                                   const Vec& z0) {
    cfg.validate();
    proposal.validate();
    obs.validate_for_inference();
    require_shape(z0.size() == prior.n, "z0 dimension mismatch");
    require_shape(all_finite(z0), "z0 must be finite");

    Rng rng(cfg.rng_seed);
    auto lp_surro = [&](const Vec& z) {
        return log_likelihood(obs, model.predict(z)) + log_prior(prior, z);
    };
    auto f_high = [&](const Vec& z) { return forward_map(problem, z); };

    const int m = cfg.subchain_length;
    const int I = cfg.max_corrections;
    ChainStore store;
    store.evals_before = problem.evals();
    store.samples = Mat(static_cast<long>(m) * I, prior.n);
    store.iteration.reserve(store.samples.rows());
    store.accepted.reserve(store.samples.rows());
    store.surrogate_depth.reserve(store.samples.rows());

    Vec z = z0;
    double cur = lp_surro(z);
    long row = 0;
    auto record = [&](int n, bool acc) {
        store.samples.row(row++) = z.transpose();
        store.iteration.push_back(n);
        store.accepted.push_back(acc ? 1 : 0);
        store.surrogate_depth.push_back(model.depth());
        if (acc) ++store.accept_count;
    };

    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int n = 1; n <= I; ++n) {
        for (int j = 0; j < m - 1; ++j) {
            StepResult step = mh_step(lp_surro, z, cur, proposal, rng);
            z = step.z;
            cur = step.logpost;
            record(n, step.accepted);
        }

        Vec zstar = proposal.perturb(z, rng);
        SelectResult sel = refinement_select(f_high, obs, prior, z, zstar, rng,
                                             cfg.indicator_ratio_flipped);

        RefinementEvent event;
        event.outer_iter = n;
        event.z_tilde = sel.z_tilde;
        double denom = sel.f_high.cwiseAbs().maxCoeff();
        if (denom <= 0.0) {
            std::cerr << "warning: degenerate high-fidelity output at outer iteration " << n
                      << "; skipping refinement check\n";
            event.err = std::numeric_limits<double>::quiet_NaN();
            event.triggered = false;
        } else {
            event.err = error_indicator(sel.f_high, model.predict(sel.z_tilde));
            event.triggered = event.err > cfg.tol;
        }

        if (event.triggered) {
            try {
                model = refine(std::move(model), problem, LocalBall(sel.z_tilde, cfg.radius),
                               cfg.q_local, cfg.head_arch, cfg.train, rng, cfg.refine_opts);
            } catch (const NumericError& e) {
                throw NumericError("refinement at outer iteration " + std::to_string(n) +
                                   " failed: " + e.what());
            }
            cur = lp_surro(z);
        }
        event.evals_total = problem.evals();
        store.events.push_back(std::move(event));

        double lp_star = lp_surro(zstar);
        if (!std::isfinite(lp_star)) lp_star = -std::numeric_limits<double>::infinity();
        bool acc = accept_decision(std::log(u(rng)), lp_star - cur);
        if (acc) {
            z = zstar;
            cur = lp_star;
        }
        record(n, acc);
    }
    store.evals_after = problem.evals();
    return {std::move(store), std::move(model)};
}

inline double rel_error(const Vec& field, const Vec& reference) {
    require_shape(field.size() == reference.size(), "rel_error field size mismatch");
    double denom = reference.cwiseAbs().maxCoeff();
    if (denom <= 0.0) throw NumericError("rel_error reference field is zero");
    return (field - reference).cwiseAbs().maxCoeff() / denom;
}

inline void write_samples_csv(std::ostream& os, const ChainStore& store) {
    const int n = static_cast<int>(store.samples.cols());
    for (int i = 0; i < n; ++i) os << 'z' << '_' << (i + 1) << ',';
    os << "iteration,accepted,surrogate_depth\n";
    for (int r = 0; r < store.size(); ++r) {
        for (int i = 0; i < n; ++i) os << str17(store.samples(r, i)) << ',';
        os << store.iteration[r] << ',' << static_cast<int>(store.accepted[r]) << ','
           << store.surrogate_depth[r] << '\n';
    }
}

inline ChainStore read_samples_csv(std::istream& is) {
    std::string line;
    std::vector<std::string> header;
    while (std::getline(is, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        header = split(line, ',');
        break;
    }
    if (header.size() < 4 || header[header.size() - 3] != "iteration" ||
        header[header.size() - 2] != "accepted" || header.back() != "surrogate_depth")
        throw IoError("samples csv header must end in iteration,accepted,surrogate_depth");
    const int n = static_cast<int>(header.size()) - 3;
    std::vector<double> coords;
    ChainStore store;
    while (std::getline(is, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        auto parts = split(line, ',');
        if (static_cast<int>(parts.size()) != n + 3)
            throw IoError("samples csv row has " + std::to_string(parts.size()) +
                          " fields, expected " + std::to_string(n + 3));
        for (int i = 0; i < n; ++i) coords.push_back(parse_double(trim(parts[i])));
        store.iteration.push_back(static_cast<int>(parse_long(trim(parts[n]))));
        char acc = parse_long(trim(parts[n + 1])) ? 1 : 0;
        store.accepted.push_back(acc);
        if (acc) ++store.accept_count;
        store.surrogate_depth.push_back(static_cast<int>(parse_long(trim(parts[n + 2]))));
    }
    if (coords.empty()) throw IoError("samples csv has no rows");
    const long rows = static_cast<long>(coords.size()) / n;
    store.samples = Mat(rows, n);
    for (long r = 0; r < rows; ++r)
        for (int i = 0; i < n; ++i) store.samples(r, i) = coords[r * n + i];
    return store;
}

inline void write_refinements_csv(std::ostream& os, const ChainStore& store) {
    os << "outer_iter,err,triggered,evals_total\n";
    for (const auto& ev : store.events)
        os << ev.outer_iter << ',' << str17(ev.err) << ',' << (ev.triggered ? 1 : 0) << ','
           << ev.evals_total << '\n';
}

}  // namespace mfnn
