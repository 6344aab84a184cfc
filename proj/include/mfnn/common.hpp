#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfnn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Rng = std::mt19937_64;

// Error taxonomy maps onto CLI exit codes: ConfigError -> 2, the rest -> 3.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ConfigError(msg);
}

inline void require_shape(bool cond, const std::string& msg) {
    if (!cond) throw ShapeError(msg);
}

inline bool all_finite(const Vec& v) { return v.allFinite(); }
inline bool all_finite(const Mat& m) { return m.allFinite(); }

// 17 significant digits survive a double -> text -> double round trip.
inline std::string str17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline double parse_double(const std::string& s) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw IoError("cannot parse floating-point value from '" + s + "'");
    }
}

inline long parse_long(const std::string& s) {
    try {
        std::size_t pos = 0;
        long v = std::stol(s, &pos);
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw IoError("cannot parse integer value from '" + s + "'");
    }
}

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

inline std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// Per-component affine standardization fitted on a column set.
// Degenerate (near-constant) components keep scale 1 so the transform
// stays invertible.
struct Standardizer {
    Vec mean;
    Vec scale;

    static Standardizer fit(const Mat& rows) {
        require_shape(rows.rows() >= 1, "standardizer needs at least one row");
        Standardizer s;
        s.mean = rows.colwise().mean();
        Vec var = (rows.rowwise() - s.mean.transpose()).array().square().colwise().mean();
        s.scale = var.array().sqrt();
        for (Eigen::Index i = 0; i < s.scale.size(); ++i)
            if (s.scale[i] < 1e-12) s.scale[i] = 1.0;
        return s;
    }

    static Standardizer identity(Eigen::Index n) {
        Standardizer s;
        s.mean = Vec::Zero(n);
        s.scale = Vec::Ones(n);
        return s;
    }

    Vec forward(const Vec& x) const {
        require_shape(x.size() == mean.size(), "standardizer dimension mismatch");
        return (x - mean).array() / scale.array();
    }

    Vec inverse(const Vec& y) const {
        require_shape(y.size() == mean.size(), "standardizer dimension mismatch");
        return (y.array() * scale.array()).matrix() + mean;
    }
};

}  // namespace mfnn
