#pragma once

#include "mfnn/common.hpp"
#include "mfnn/field.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <atomic>
#include <fstream>
#include <functional>

namespace mfnn {

struct Grid {
    int M = 31;  // interior nodes per axis on [0,1]^2

    explicit Grid(int m) : M(m) { require(M >= 3, "grid needs M >= 3"); }
    Grid() = default;

    double h() const { return 1.0 / (M + 1); }
    Mat nodes() const { return interior_nodes(M); }
};

inline double source_term(double x, double y) {
    return 100.0 * std::sin(M_PI * x) * std::sin(M_PI * y);
}

// u at interior nodes, row-major: values[r*M + c] is u at ((c+1)h, (r+1)h).
struct SolverSolution {
    int M = 0;
    Vec values;
};

struct Observation {
    Vec data;
    Mat sensors;        // m_obs x 2
    Vec noise_sigma;    // per-component std deviation used at generation time
    double noise_level = 0.0;  // relative level delta, 0 in absolute mode

    int size() const { return static_cast<int>(data.size()); }

    void validate_for_inference() const {
        require_shape(data.size() >= 1 && data.size() == sensors.rows() &&
                          data.size() == noise_sigma.size(),
                      "observation vectors are inconsistent");
        require(noise_sigma.minCoeff() > 0.0,
                "observation noise_sigma must be strictly positive for inference");
    }
};

using SourceFn = std::function<double(double, double)>;

struct ForwardProblem {
    Grid grid;
    const FieldParam* field = nullptr;
    Mat sensors;
    SourceFn source = source_term;
    mutable std::atomic<long> eval_counter{0};

    ForwardProblem(Grid g, const FieldParam& f, Mat sens)
        : grid(g), field(&f), sensors(std::move(sens)) {
        require_shape(sensors.cols() == 2, "sensors must be 2-D points");
    }
    ForwardProblem(const ForwardProblem&) = delete;
    ForwardProblem& operator=(const ForwardProblem&) = delete;

    long evals() const { return eval_counter.load(); }
};

// Row-major 9x9 sensor grid on {0.1,...,0.9}^2 (rows ordered by y, x fastest).
inline Mat default_sensor_grid() {
    Mat s(81, 2);
    int k = 0;
    for (int j = 1; j <= 9; ++j)
        for (int i = 1; i <= 9; ++i) {
            s(k, 0) = 0.1 * i;
            s(k, 1) = 0.1 * j;
            ++k;
        }
    return s;
}

// Five-point flux-form discretization of -div(kappa grad u) = f with
// homogeneous Dirichlet data; face permeability is the arithmetic mean of
// the two adjacent nodal values (boundary nodes included for faces).
inline SolverSolution solve(const ForwardProblem& problem, const Vec& z) {
    const int M = problem.grid.M;
    const double h = problem.grid.h();
    const int N = M * M;

    Mat closed((M + 2) * (M + 2), 2);
    for (int r = 0; r < M + 2; ++r)
        for (int c = 0; c < M + 2; ++c) {
            closed((M + 2) * r + c, 0) = c * h;
            closed((M + 2) * r + c, 1) = r * h;
        }
    Vec kap = problem.field->kappa_at(z, closed);
    require_shape(kap.minCoeff() > 0.0, "permeability must be positive on the grid");
    auto kat = [&](int r, int c) { return kap[(M + 2) * r + c]; };

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(5) * N);
    Vec b(N);
    const int dr[4] = {0, 0, 1, -1};
    const int dc[4] = {1, -1, 0, 0};
    for (int r = 0; r < M; ++r)
        for (int c = 0; c < M; ++c) {
            int row = r * M + c;
            double kC = kat(r + 1, c + 1);
            double diag = 0.0;
            for (int f = 0; f < 4; ++f) {
                double kF = 0.5 * (kC + kat(r + 1 + dr[f], c + 1 + dc[f]));
                diag += kF;
                int rr = r + dr[f], cc = c + dc[f];
                if (rr >= 0 && rr < M && cc >= 0 && cc < M)
                    trips.emplace_back(row, rr * M + cc, -kF);
            }
            trips.emplace_back(row, row, diag);
            b[row] = problem.source((c + 1) * h, (r + 1) * h) * h * h;
        }

    Eigen::SparseMatrix<double> A(N, N);
    A.setFromTriplets(trips.begin(), trips.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
    if (solver.info() != Eigen::Success)
        throw NumericError("sparse factorization of the diffusion operator failed");
    Vec u = solver.solve(b);
    if (solver.info() != Eigen::Success) throw NumericError("sparse solve failed");

    double bnorm = b.norm();
    double resid = (A * u - b).norm();
    if (bnorm > 0.0) {
        if (resid / bnorm >= 1e-10)
            throw NumericError("linear solve residual " + str17(resid / bnorm) +
                               " exceeds 1e-10 relative");
    } else if (resid >= 1e-12) {
        throw NumericError("homogeneous solve residual " + str17(resid) + " is not negligible");
    }
    if (!all_finite(u)) throw NumericError("solution contains non-finite values");

    problem.eval_counter.fetch_add(1, std::memory_order_relaxed);
    SolverSolution sol;
    sol.M = M;
    sol.values = std::move(u);
    return sol;
}

// Bilinear interpolation on the closed grid (zero boundary extension).
inline Vec observe(const SolverSolution& sol, const Mat& sensors) {
    const int M = sol.M;
    const double h = 1.0 / (M + 1);
    auto uc = [&](int ix, int iy) -> double {
        if (ix <= 0 || ix > M || iy <= 0 || iy > M) return 0.0;
        return sol.values[(iy - 1) * M + (ix - 1)];
    };
    Vec out(sensors.rows());
    for (Eigen::Index s = 0; s < sensors.rows(); ++s) {
        double x = sensors(s, 0), y = sensors(s, 1);
        require(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0,
                "sensor (" + str17(x) + ", " + str17(y) + ") lies outside [0,1]^2");
        double fx = x / h, fy = y / h;
        int ix = std::min(static_cast<int>(fx), M);
        int iy = std::min(static_cast<int>(fy), M);
        double tx = fx - ix, ty = fy - iy;
        out[s] = uc(ix, iy) * (1 - tx) * (1 - ty) + uc(ix + 1, iy) * tx * (1 - ty) +
                 uc(ix, iy + 1) * (1 - tx) * ty + uc(ix + 1, iy + 1) * tx * ty;
    }
    return out;
}

inline Vec forward_map(const ForwardProblem& problem, const Vec& z) {
    return observe(solve(problem, z), problem.sensors);
}

struct NoiseSpec {
    enum class Mode { Relative, Absolute };
    Mode mode = Mode::Relative;
    double delta = 0.05;      // relative mode level
    double sigma_abs = 0.05;  // absolute mode std deviation
};

inline Observation generate_data(const ForwardProblem& problem_fine, int inversion_M,
                                 const Vec& z_true, const NoiseSpec& noise,
                                 std::uint64_t rng_seed) {
    if (problem_fine.grid.M == inversion_M)
        throw ConfigError("inverse crime: data grid M=" + std::to_string(problem_fine.grid.M) +
                          " equals the inversion grid; use a strictly finer data grid");
    require(problem_fine.grid.M > inversion_M,
            "data grid must be strictly finer than the inversion grid");
    Vec u = forward_map(problem_fine, z_true);
    Observation obs;
    obs.sensors = problem_fine.sensors;
    Rng rng(rng_seed);
    std::normal_distribution<double> gauss;
    Vec xi(u.size());
    for (Eigen::Index j = 0; j < xi.size(); ++j) xi[j] = gauss(rng);
    if (noise.mode == NoiseSpec::Mode::Relative) {
        double sigma = u.cwiseAbs().maxCoeff() * noise.delta;
        obs.data = u + sigma * xi;
        obs.noise_sigma = Vec::Constant(u.size(), sigma);
        obs.noise_level = noise.delta;
    } else {
        obs.data = u + noise.sigma_abs * xi;
        obs.noise_sigma = Vec::Constant(u.size(), noise.sigma_abs);
        obs.noise_level = 0.0;
    }
    return obs;
}

struct DataMeta {
    std::uint64_t seed = 0;
    std::string noise_mode;  // "relative" | "absolute"
    double delta = 0.0;
    double sigma_abs = 0.0;
    double realized_sigma = 0.0;
    int grid_data = 0;
    int grid_inversion = 0;
    Vec z_true;
};

inline void write_data_meta(std::ostream& os, const DataMeta& meta) {
    os << "seed = " << meta.seed << '\n';
    os << "noise_mode = " << meta.noise_mode << '\n';
    os << "delta = " << str17(meta.delta) << '\n';
    os << "sigma_abs = " << str17(meta.sigma_abs) << '\n';
    os << "realized_sigma = " << str17(meta.realized_sigma) << '\n';
    os << "grid_data = " << meta.grid_data << '\n';
    os << "grid_inversion = " << meta.grid_inversion << '\n';
    os << "z_true =";
    for (Eigen::Index i = 0; i < meta.z_true.size(); ++i) os << ' ' << str17(meta.z_true[i]);
    os << '\n';
}

inline DataMeta read_data_meta(std::istream& is) {
    DataMeta meta;
    std::string line;
    while (std::getline(is, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw IoError("metadata line without '=': " + line);
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key == "seed")
            meta.seed = static_cast<std::uint64_t>(parse_long(val));
        else if (key == "noise_mode")
            meta.noise_mode = val;
        else if (key == "delta")
            meta.delta = parse_double(val);
        else if (key == "sigma_abs")
            meta.sigma_abs = parse_double(val);
        else if (key == "realized_sigma")
            meta.realized_sigma = parse_double(val);
        else if (key == "grid_data")
            meta.grid_data = static_cast<int>(parse_long(val));
        else if (key == "grid_inversion")
            meta.grid_inversion = static_cast<int>(parse_long(val));
        else if (key == "z_true") {
            std::vector<double> vals;
            for (const auto& tok : split(val, ' '))
                if (!trim(tok).empty()) vals.push_back(parse_double(trim(tok)));
            meta.z_true = Eigen::Map<Vec>(vals.data(), vals.size());
        } else {
            throw IoError("unknown metadata key '" + key + "'");
        }
    }
    return meta;
}

inline void write_observation_csv(std::ostream& os, const Observation& obs) {
    os << "sensor_x,sensor_y,value\n";
    for (int j = 0; j < obs.size(); ++j)
        os << str17(obs.sensors(j, 0)) << ',' << str17(obs.sensors(j, 1)) << ','
           << str17(obs.data[j]) << '\n';
}

inline Observation read_observation_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || trim(line) != "sensor_x,sensor_y,value")
        throw IoError("observation csv header missing");
    std::vector<std::array<double, 3>> rows;
    while (std::getline(is, line)) {
        line = trim(line);
        if (line.empty()) continue;
        auto parts = split(line, ',');
        if (parts.size() != 3) throw IoError("observation csv row needs 3 columns");
        rows.push_back({parse_double(parts[0]), parse_double(parts[1]), parse_double(parts[2])});
    }
    if (rows.empty()) throw IoError("observation csv has no data rows");
    Observation obs;
    obs.sensors = Mat(rows.size(), 2);
    obs.data = Vec(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        obs.sensors(i, 0) = rows[i][0];
        obs.sensors(i, 1) = rows[i][1];
        obs.data[i] = rows[i][2];
    }
    obs.noise_sigma = Vec::Zero(rows.size());
    return obs;
}

}  // namespace mfnn
