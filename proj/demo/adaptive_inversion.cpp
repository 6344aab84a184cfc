// End-to-end desk-scale inversion with the library API: synthesize data,
// train an offline surrogate, run the adaptive chain, and report how close
// the posterior mean field lands to the truth. Finishes in under a minute.
#include "mfnn/experiment.hpp"

#include <iostream>

int main() {
    using namespace mfnn;

    Vec z_true(9);
    z_true << 0.8, -0.5, 0.3, -0.2, 0.6, -0.9, 0.1, 0.4, -0.3;

    RbfFieldParam field;
    Prior prior(9);

    ForwardProblem fine(Grid(63), field, default_sensor_grid());
    NoiseSpec noise;
    noise.delta = 0.05;
    Observation obs = generate_data(fine, 31, z_true, noise, 42);

    ForwardProblem problem(Grid(31), field, default_sensor_grid());
    TrainConfig train;
    train.epochs = 3000;
    train.rng_seed = 3;
    OfflineBuild offline = build_low_fidelity(problem, prior, 60, {40, 40}, train, 2);
    std::cout << "offline: " << problem.evals() << " solves, final loss "
              << offline.epoch_losses.back() << '\n';

    AdaptiveConfig cfg;
    cfg.subchain_length = 400;
    cfg.max_corrections = 10;
    cfg.tol = 0.06;
    cfg.radius = 0.2;
    cfg.q_local = 10;
    cfg.head_arch = {50};
    cfg.train = train;
    cfg.train.epochs = 800;
    cfg.rng_seed = 7;

    long before = problem.evals();
    ProposalSpec proposal = ProposalSpec::isotropic(9, 0.05);
    AdaptiveResult run =
        adaptive_run(problem, obs, prior, offline.model, proposal, cfg, Vec::Zero(9));
    std::cout << "chain: " << run.store.size() << " states, acceptance "
              << run.store.acceptance_rate() << ", online solves "
              << (problem.evals() - before) << '\n';

    long triggered = 0;
    for (const auto& ev : run.store.events)
        if (ev.triggered) ++triggered;
    std::cout << "refinements: " << triggered << ", surrogate depth "
              << run.model.depth() << '\n';

    Mat nodes = interior_nodes(31);
    SummaryFields summary = summarize(run.store, 0.4, field, nodes);
    Vec truth_field = field.kappa_at(z_true, nodes);
    std::cout << "posterior mean field error: " << rel_error(summary.kappa_mean, truth_field)
              << '\n';
    return 0;
}
