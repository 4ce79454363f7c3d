#pragma once

// Small deterministic Nelder-Mead simplex minimizer for low-dimensional
// derivative-free searches.

#include <algorithm>
#include <functional>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

namespace dempc {

struct NelderMeadOptions {
    int max_evals = 4000;
    double x_tol = 1e-12;   // simplex diameter
    double f_tol = 1e-14;   // value spread
    double initial_step = 1.0;
};

struct NelderMeadResult {
    Eigen::VectorXd x;
    double value = 0.0;
    int evals = 0;
};

inline NelderMeadResult nelder_mead_minimize(const std::function<double(const Eigen::VectorXd&)>& f,
                                             const Eigen::VectorXd& x0,
                                             const NelderMeadOptions& opts = {}) {
    const int n = static_cast<int>(x0.size());
    const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;

    std::vector<Eigen::VectorXd> pts(n + 1, x0);
    std::vector<double> vals(n + 1);
    int evals = 0;
    for (int i = 1; i <= n; ++i) pts[i](i - 1) += opts.initial_step;
    for (int i = 0; i <= n; ++i) {
        vals[i] = f(pts[i]);
        ++evals;
    }

    std::vector<int> order(n + 1);
    auto sort_order = [&] {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return vals[a] < vals[b]; });
    };

    while (evals < opts.max_evals) {
        sort_order();
        const int best = order[0], worst = order[n], second_worst = order[n - 1];

        double diam = 0.0;
        for (int i = 1; i <= n; ++i)
            diam = std::max(diam, (pts[order[i]] - pts[best]).cwiseAbs().maxCoeff());
        if (diam <= opts.x_tol && vals[worst] - vals[best] <= opts.f_tol) break;

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (int i = 0; i <= n; ++i)
            if (i != worst) centroid += pts[i];
        centroid /= n;

        const Eigen::VectorXd xr = centroid + alpha * (centroid - pts[worst]);
        const double fr = f(xr);
        ++evals;

        if (fr < vals[best]) {
            const Eigen::VectorXd xe = centroid + gamma * (xr - centroid);
            const double fe = f(xe);
            ++evals;
            if (fe < fr) {
                pts[worst] = xe;
                vals[worst] = fe;
            } else {
                pts[worst] = xr;
                vals[worst] = fr;
            }
        } else if (fr < vals[second_worst]) {
            pts[worst] = xr;
            vals[worst] = fr;
        } else {
            const bool outside = fr < vals[worst];
            const Eigen::VectorXd xc =
                outside ? (centroid + rho * (xr - centroid)).eval()
                        : (centroid + rho * (pts[worst] - centroid)).eval();
            const double fc = f(xc);
            ++evals;
            if (fc < (outside ? fr : vals[worst])) {
                pts[worst] = xc;
                vals[worst] = fc;
            } else {
                for (int i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    pts[i] = pts[best] + sigma * (pts[i] - pts[best]);
                    vals[i] = f(pts[i]);
                    ++evals;
                }
            }
        }
    }

    sort_order();
    NelderMeadResult res;
    res.x = pts[order[0]];
    res.value = vals[order[0]];
    res.evals = evals;
    return res;
}

}  // namespace dempc
