#pragma once

#include "mfnn/field.hpp"
#include "mfnn/mcmc.hpp"

namespace mfnn {

// Streaming mean/variance over vector-valued observations (Welford updates).
struct StreamingMoments {
    long count = 0;
    Vec mean;
    Vec m2;

    void add(const Vec& x) {
        if (count == 0) {
            mean = Vec::Zero(x.size());
            m2 = Vec::Zero(x.size());
        }
        require_shape(x.size() == mean.size(), "streaming moments dimension mismatch");
        ++count;
        Vec delta = x - mean;
        mean += delta / count;
        m2 += delta.cwiseProduct(x - mean);
    }

    Vec variance() const {
        require_shape(count >= 1, "no observations accumulated");
        if (count == 1) return Vec::Zero(mean.size());
        return m2 / (count - 1);
    }

    Vec stddev() const { return variance().array().sqrt(); }
};

struct SummaryFields {
    Vec kappa_mean;
    Vec kappa_std;
    Vec p_mean;  // p = log kappa
    Vec p_std;
    long retained = 0;
    long discarded = 0;
};

// Maps each retained posterior sample through the field parameterization and
// accumulates pointwise statistics of kappa and log kappa at the given points.
inline SummaryFields summarize(const ChainStore& store, double burn_in_fraction,
                               const FieldParam& field, const Mat& points) {
    require(store.size() >= 1, "summarize needs a nonempty chain");
    require(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0,
            "burn_in_fraction must lie in [0,1)");
    long skip = static_cast<long>(burn_in_fraction * store.size());
    if (skip >= store.size()) skip = store.size() - 1;
    StreamingMoments kappa_acc, p_acc;
    for (long r = skip; r < store.size(); ++r) {
        Vec kappa = field.kappa_at(store.samples.row(r).transpose(), points);
        kappa_acc.add(kappa);
        p_acc.add(kappa.array().log().matrix());
    }
    SummaryFields out;
    out.kappa_mean = kappa_acc.mean;
    out.kappa_std = kappa_acc.stddev();
    out.p_mean = p_acc.mean;
    out.p_std = p_acc.stddev();
    out.retained = kappa_acc.count;
    out.discarded = skip;
    return out;
}

// Grid field serialized as an M x M CSV matrix (row-major, rows ordered by y).
inline void write_field_csv(std::ostream& os, const Vec& field, int M) {
    require_shape(field.size() == static_cast<Eigen::Index>(M) * M, "field size is not M^2");
    for (int r = 0; r < M; ++r) {
        for (int c = 0; c < M; ++c) {
            if (c) os << ',';
            os << str17(field[r * M + c]);
        }
        os << '\n';
    }
}

inline Vec read_field_csv(std::istream& is) {
    std::vector<double> vals;
    std::string line;
    long cols = -1;
    while (std::getline(is, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        auto parts = split(line, ',');
        if (cols < 0) cols = static_cast<long>(parts.size());
        if (static_cast<long>(parts.size()) != cols) throw IoError("ragged field csv");
        for (const auto& p : parts) vals.push_back(parse_double(trim(p)));
    }
    if (vals.empty()) throw IoError("field csv has no values");
    return Eigen::Map<Vec>(vals.data(), vals.size());
}

}  // namespace mfnn
