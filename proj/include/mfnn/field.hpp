#pragma once

#include "mfnn/common.hpp"

#include <Eigen/Eigenvalues>

#include <fstream>
#include <memory>

namespace mfnn {

// Maps the inference vector z to permeability values at arbitrary points.
struct FieldParam {
    virtual ~FieldParam() = default;
    virtual int dim() const = 0;
    virtual Vec kappa_at(const Vec& z, const Mat& points) const = 0;
};

// Nine Gaussian bumps on the 3x3 grid {0.25,0.5,0.75}^2 with positive
// weights exp(z_i). Center i = 3*row + col, rows ordered by y, x fastest.
struct RbfFieldParam final : FieldParam {
    Mat centers;
    double width = 0.15;

    RbfFieldParam() : centers(9, 2) {
        const double axis[3] = {0.25, 0.5, 0.75};
        int i = 0;
        for (double y : axis)
            for (double x : axis) {
                centers(i, 0) = x;
                centers(i, 1) = y;
                ++i;
            }
    }

    explicit RbfFieldParam(Mat c, double w = 0.15) : centers(std::move(c)), width(w) {
        require_shape(centers.cols() == 2, "rbf centers must be 2-D points");
    }

    int dim() const override { return static_cast<int>(centers.rows()); }

    Vec kappa_at(const Vec& z, const Mat& points) const override {
        require_shape(z.size() == centers.rows(), "rbf weight count mismatch");
        require_shape(all_finite(z), "rbf weights must be finite");
        const double w2 = width * width;
        Vec ez = z.array().exp();
        Vec out = Vec::Zero(points.rows());
        for (Eigen::Index p = 0; p < points.rows(); ++p) {
            double acc = 0.0;
            for (Eigen::Index i = 0; i < centers.rows(); ++i) {
                double dx = points(p, 0) - centers(i, 0);
                double dy = points(p, 1) - centers(i, 1);
                acc += ez[i] * std::exp(-0.5 * (dx * dx + dy * dy) / w2);
            }
            out[p] = acc;
        }
        return out;
    }
};

inline double rbf_kappa(const RbfFieldParam& field, const Vec& z, double x, double y) {
    Mat p(1, 2);
    p << x, y;
    return field.kappa_at(z, p)[0];
}

inline double kl_kernel(double ax, double ay, double bx, double by, double l, double sigma2) {
    double dx = ax - bx, dy = ay - by;
    return sigma2 * std::exp(-(dx * dx + dy * dy) / (2.0 * l * l));
}

// Nystrom eigenbasis of the squared-exponential covariance on the interior
// node set, with equal-area cell weights 1/M^2. Eigenfunctions are stored
// orthonormal in the discrete L2 inner product (1/M^2) * sum phi_i phi_j.
struct KlBasis {
    int M = 0;
    double l = 0.1;
    double sigma2 = 1.0;
    int n = 0;
    Vec lambda;            // top-n, descending
    Mat phi;               // M^2 x n, node values
    Mat nodes;             // M^2 x 2, row-major (row = y, x fastest)
    Vec all_eigenvalues;   // full spectrum, for trace diagnostics
};

inline Mat interior_nodes(int M) {
    double h = 1.0 / (M + 1);
    Mat nodes(M * M, 2);
    for (int r = 0; r < M; ++r)
        for (int c = 0; c < M; ++c) {
            nodes(r * M + c, 0) = (c + 1) * h;
            nodes(r * M + c, 1) = (r + 1) * h;
        }
    return nodes;
}

inline KlBasis kl_build(int M, int n, double l = 0.1, double sigma2 = 1.0) {
    require(M >= 3, "kl_build needs M >= 3");
    require(n >= 1 && n <= M * M,
            "kl truncation n must be in [1, M^2]; got n=" + std::to_string(n) +
                " with M^2=" + std::to_string(M * M));
    KlBasis basis;
    basis.M = M;
    basis.l = l;
    basis.sigma2 = sigma2;
    basis.n = n;
    basis.nodes = interior_nodes(M);

    const int N = M * M;
    const double w = 1.0 / (N);
    Mat C(N, N);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j <= i; ++j) {
            double v = w * kl_kernel(basis.nodes(i, 0), basis.nodes(i, 1), basis.nodes(j, 0),
                                     basis.nodes(j, 1), l, sigma2);
            C(i, j) = v;
            C(j, i) = v;
        }
    Eigen::SelfAdjointEigenSolver<Mat> eig(C);
    if (eig.info() != Eigen::Success) throw NumericError("kl eigendecomposition failed");
    Vec evals = eig.eigenvalues();  // ascending
    if (evals.minCoeff() < -1e-10)
        throw NumericError("kl covariance is not positive semidefinite: min eigenvalue " +
                           str17(evals.minCoeff()));
    basis.all_eigenvalues = evals.reverse();
    basis.lambda = basis.all_eigenvalues.head(n);
    basis.phi = Mat(N, n);
    double scale = std::sqrt(static_cast<double>(N));  // 1/sqrt(w)
    for (int k = 0; k < n; ++k) basis.phi.col(k) = eig.eigenvectors().col(N - 1 - k) * scale;
    return basis;
}

// Nystrom extension: phi_k(p) = (1/lambda_k) * sum_j w * C(p, x_j) * phi_k(x_j).
inline Mat kl_extend(const KlBasis& basis, const Mat& points) {
    require_shape(points.cols() == 2, "kl_extend expects 2-D points");
    const int N = basis.M * basis.M;
    const double w = 1.0 / N;
    Mat K(points.rows(), N);
    for (Eigen::Index p = 0; p < points.rows(); ++p)
        for (int j = 0; j < N; ++j)
            K(p, j) = kl_kernel(points(p, 0), points(p, 1), basis.nodes(j, 0), basis.nodes(j, 1),
                                basis.l, basis.sigma2);
    Mat ext = w * (K * basis.phi);
    for (int k = 0; k < basis.n; ++k) {
        if (basis.lambda[k] <= 0)
            throw NumericError("kl_extend needs strictly positive eigenvalues");
        ext.col(k) /= basis.lambda[k];
    }
    return ext;
}

inline Vec kl_log_field(const KlBasis& basis, const Vec& z) {
    require_shape(z.size() == basis.n, "kl coefficient count mismatch: expected " +
                                           std::to_string(basis.n) + ", got " +
                                           std::to_string(z.size()));
    return basis.phi * (z.array() * basis.lambda.array().sqrt()).matrix();
}

inline Vec kl_kappa(const KlBasis& basis, const Vec& z) {
    return kl_log_field(basis, z).array().exp();
}

struct KlFieldParam final : FieldParam {
    KlBasis basis;

    explicit KlFieldParam(KlBasis b) : basis(std::move(b)) {}

    int dim() const override { return basis.n; }

    Vec kappa_at(const Vec& z, const Mat& points) const override {
        require_shape(z.size() == basis.n, "kl coefficient count mismatch");
        require_shape(all_finite(z), "kl coefficients must be finite");
        if (points.rows() == basis.nodes.rows() && points.isApprox(basis.nodes, 1e-12))
            return kl_kappa(basis, z);
        Mat ext = kl_extend(basis, points);
        return (ext * (z.array() * basis.lambda.array().sqrt()).matrix()).array().exp();
    }
};

// Cache file layout: a key line, then eigenvalues, then phi rows.
inline void write_kl_cache(std::ostream& os, const KlBasis& basis) {
    os << "kl-basis M=" << basis.M << " l=" << str17(basis.l) << " sigma2=" << str17(basis.sigma2)
       << " n=" << basis.n << '\n';
    for (int k = 0; k < basis.n; ++k) os << str17(basis.lambda[k]) << '\n';
    for (Eigen::Index i = 0; i < basis.phi.rows(); ++i) {
        for (int k = 0; k < basis.n; ++k) {
            if (k) os << ' ';
            os << str17(basis.phi(i, k));
        }
        os << '\n';
    }
    for (Eigen::Index k = 0; k < basis.all_eigenvalues.size(); ++k)
        os << str17(basis.all_eigenvalues[k]) << '\n';
}

inline KlBasis read_kl_cache(std::istream& is, int M, double l, double sigma2, int n) {
    std::string line;
    if (!std::getline(is, line)) throw IoError("kl cache is empty");
    std::string expect = "kl-basis M=" + std::to_string(M) + " l=" + str17(l) +
                         " sigma2=" + str17(sigma2) + " n=" + std::to_string(n);
    if (trim(line) != expect)
        throw IoError("kl cache key mismatch: have '" + trim(line) + "', want '" + expect + "'");
    KlBasis basis;
    basis.M = M;
    basis.l = l;
    basis.sigma2 = sigma2;
    basis.n = n;
    basis.nodes = interior_nodes(M);
    basis.lambda = Vec(n);
    for (int k = 0; k < n; ++k) {
        if (!std::getline(is, line)) throw IoError("kl cache truncated in eigenvalues");
        basis.lambda[k] = parse_double(trim(line));
    }
    const int N = M * M;
    basis.phi = Mat(N, n);
    for (int i = 0; i < N; ++i) {
        if (!std::getline(is, line)) throw IoError("kl cache truncated in eigenfunctions");
        auto parts = split(trim(line), ' ');
        if (static_cast<int>(parts.size()) != n) throw IoError("kl cache row width mismatch");
        for (int k = 0; k < n; ++k) basis.phi(i, k) = parse_double(parts[k]);
    }
    std::vector<double> rest;
    while (std::getline(is, line)) {
        line = trim(line);
        if (!line.empty()) rest.push_back(parse_double(line));
    }
    basis.all_eigenvalues = Eigen::Map<Vec>(rest.data(), rest.size());
    return basis;
}

inline KlBasis kl_build_cached(const std::string& cache_path, int M, int n, double l = 0.1,
                               double sigma2 = 1.0) {
    if (!cache_path.empty()) {
        std::ifstream in(cache_path);
        if (in) {
            try {
                return read_kl_cache(in, M, l, sigma2, n);
            } catch (const IoError&) {
                // stale or mismatched cache; rebuild below
            }
        }
    }
    KlBasis basis = kl_build(M, n, l, sigma2);
    if (!cache_path.empty()) {
        std::ofstream out(cache_path);
        if (out) write_kl_cache(out, basis);
    }
    return basis;
}

}  // namespace mfnn
