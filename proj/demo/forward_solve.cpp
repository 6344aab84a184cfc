// Solves the diffusion equation for one permeability field and prints the
// pressure at a few sensor locations, then shows how noisy synthetic
// observations are produced on a finer grid.
#include "mfnn/pde.hpp"

#include <iostream>

int main() {
    using namespace mfnn;

    Vec weights(9);
    weights << 1.0, -0.5, 0.3, 0.8, -1.2, 0.4, -0.3, 0.6, -0.9;

    RbfFieldParam field;
    ForwardProblem problem(Grid(31), field, default_sensor_grid());
    Vec pressures = forward_map(problem, weights);

    std::cout << "pressure at the first five sensors:\n";
    for (int j = 0; j < 5; ++j)
        std::cout << "  (" << problem.sensors(j, 0) << ", " << problem.sensors(j, 1)
                  << ") -> " << pressures[j] << '\n';

    ForwardProblem fine(Grid(63), field, default_sensor_grid());
    NoiseSpec noise;
    noise.mode = NoiseSpec::Mode::Relative;
    noise.delta = 0.05;
    Observation obs = generate_data(fine, 31, weights, noise, 1234);

    std::cout << "noisy observations (sigma " << obs.noise_sigma[0] << "):\n";
    for (int j = 0; j < 5; ++j)
        std::cout << "  " << obs.data[j] << "  (clean " << pressures[j] << ")\n";
    std::cout << "solver calls: coarse " << problem.evals() << ", fine " << fine.evals() << '\n';
    return 0;
}
