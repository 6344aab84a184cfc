#pragma once

#include "mfnn/common.hpp"

#include <algorithm>

namespace mfnn {

// Nelder-Mead on a continuous objective; deterministic given the start point.
// Used to pick chain starting points on the surrogate posterior, where
// gradients are unavailable and evaluations are cheap.
template <typename F>
Vec nelder_mead(F&& objective, const Vec& x0, int max_iters = 4000, double init_step = 0.5,
                double f_tol = 1e-10) {
    const int n = static_cast<int>(x0.size());
    const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;

    std::vector<Vec> pts(n + 1, x0);
    std::vector<double> fv(n + 1);
    for (int i = 0; i < n; ++i) pts[i + 1][i] += init_step;
    for (int i = 0; i <= n; ++i) fv[i] = objective(pts[i]);

    std::vector<int> order(n + 1);
    for (int it = 0; it < max_iters; ++it) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) { return fv[a] < fv[b]; });
        if (std::abs(fv[order[n]] - fv[order[0]]) < f_tol) break;

        Vec centroid = Vec::Zero(n);
        for (int i = 0; i < n; ++i) centroid += pts[order[i]];
        centroid /= n;
        int worst = order[n];

        Vec xr = centroid + alpha * (centroid - pts[worst]);
        double fr = objective(xr);
        if (fr < fv[order[0]]) {
            Vec xe = centroid + gamma * (xr - centroid);
            double fe = objective(xe);
            if (fe < fr) {
                pts[worst] = xe;
                fv[worst] = fe;
            } else {
                pts[worst] = xr;
                fv[worst] = fr;
            }
        } else if (fr < fv[order[n - 1]]) {
            pts[worst] = xr;
            fv[worst] = fr;
        } else {
            Vec xc = centroid + rho * (pts[worst] - centroid);
            double fc = objective(xc);
            if (fc < fv[worst]) {
                pts[worst] = xc;
                fv[worst] = fc;
            } else {
                for (int i = 1; i <= n; ++i) {
                    int idx = order[i];
                    pts[idx] = pts[order[0]] + sigma * (pts[idx] - pts[order[0]]);
                    fv[idx] = objective(pts[idx]);
                }
            }
        }
    }
    int best = 0;
    for (int i = 1; i <= n; ++i)
        if (fv[i] < fv[best]) best = i;
    return pts[best];
}

}  // namespace mfnn
