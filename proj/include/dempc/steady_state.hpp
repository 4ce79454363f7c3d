#pragma once

// The discounted optimal steady state: minimize the rotated stage cost
// L(x,u) + (gamma-1) V(x) over fixed points x = f(x,u). For scalar
// problems the constraint is eliminated through the steady input u_s(x)
// and the remaining one-dimensional objective is globally scanned and then
// refined by golden-section search. The rotated objective is invariant
// under constant cost shifts, so raw (unnormalized) values are used here.

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "dempc/dp.hpp"
#include "dempc/problem.hpp"

namespace dempc {

struct SteadyInputResult {
    std::optional<double> u;
    bool singular = false;  // dynamics cannot be inverted at this state
};

// Input holding the state fixed: f(x,u) = x. Uses the closed form
// u = (1-b) x / (a (1-x)) for the built-in family and a scan-plus-bisection
// root search (smallest root) for expression dynamics. Returns no value
// when the required input leaves the input interval.
inline SteadyInputResult steady_input(const ScalarGridProblem& pb, double x) {
    if (!pb.x_interval().contains(x))
        throw std::out_of_range("steady_input: x outside the state interval");
    const Interval ui = pb.u_interval();
    SteadyInputResult res;

    if (const DynamicsFamily* fam = pb.dynamics_family()) {
        const double denom = fam->a * (1.0 - x);
        if (std::abs(denom) <= 1e-14 * std::max(1.0, std::abs(fam->a))) {
            res.singular = true;
            return res;
        }
        const double u = (1.0 - fam->b) * x / denom;
        if (!std::isfinite(u) || u < ui.lo - 1e-12 || u > ui.hi + 1e-12) return res;
        res.u = std::min(std::max(u, ui.lo), ui.hi);
        return res;
    }

    auto g = [&](double u) { return pb.dynamics(x, u) - x; };
    const int scan = 8 * pb.nu();
    double prev_u = ui.lo;
    double prev_g = g(prev_u);
    for (int i = 1; i <= scan; ++i) {
        const double u = ui.lo + (ui.hi - ui.lo) * i / scan;
        const double gu = g(u);
        if (prev_g == 0.0 || prev_g * gu < 0.0) {
            double lo = prev_u, hi = u;
            double glo = prev_g;
            for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
                const double mid = 0.5 * (lo + hi);
                const double gm = g(mid);
                if (glo * gm <= 0.0) {
                    hi = mid;
                } else {
                    lo = mid;
                    glo = gm;
                }
            }
            const double u_root = 0.5 * (lo + hi);
            if (std::abs(g(u_root)) <= 1e-12) {
                res.u = u_root;
                return res;
            }
        }
        prev_u = u;
        prev_g = gu;
    }
    if (std::abs(prev_g) <= 1e-12) res.u = ui.hi;
    return res;
}

struct SteadyState {
    double x_s = 0.0;
    double u_s = 0.0;
    double cost_tilde = 0.0;  // rotated stage cost at (x_s, u_s)
    double gamma = 0.0;
    bool multiple = false;  // further global minimizers within 1e-9
};

namespace detail {

inline double golden_min(const std::function<double(double)>& f, double lo, double hi,
                         double tol = 1e-12) {
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = hi - gr * (hi - lo);
    double d = lo + gr * (hi - lo);
    double fc = f(c), fd = f(d);
    while (hi - lo > tol) {
        if (fc < fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - gr * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + gr * (hi - lo);
            fd = f(d);
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

inline SteadyState solve_optimal_steady_state(const ScalarGridProblem& pb,
                                              const GridValueFunction& v, int scan_points = 4001) {
    if (v.grid.n != pb.nx())
        throw std::invalid_argument("solve_optimal_steady_state: value grid mismatch");
    const double gamma = pb.gamma();
    const Interval xi = pb.x_interval();

    auto objective = [&](double x) -> double {
        const SteadyInputResult si = steady_input(pb, x);
        if (!si.u) return std::numeric_limits<double>::infinity();
        return pb.stage_cost(x, *si.u) + (gamma - 1.0) * evaluate_value(v, x);
    };

    const double step = xi.length() / (scan_points - 1);
    std::vector<double> phi(scan_points);
    int best_i = -1;
    for (int i = 0; i < scan_points; ++i) {
        phi[i] = objective(xi.lo + step * i);
        if (std::isfinite(phi[i]) && (best_i < 0 || phi[i] < phi[best_i])) best_i = i;
    }
    if (best_i < 0)
        throw std::runtime_error("solve_optimal_steady_state: no admissible steady state");

    auto refine = [&](int i) {
        const double lo = xi.lo + step * std::max(0, i - 1);
        const double hi = xi.lo + step * std::min(scan_points - 1, i + 1);
        return detail::golden_min(objective, lo, hi);
    };

    double x_best = refine(best_i);
    double phi_best = objective(x_best);

    // group near-optimal scan points into contiguous clusters
    std::vector<int> cluster_reps;
    int last = -10;
    for (int i = 0; i < scan_points; ++i) {
        if (!std::isfinite(phi[i]) || phi[i] > phi_best + 1e-9) continue;
        if (i > last + 2) cluster_reps.push_back(i);
        else if (!cluster_reps.empty() && phi[i] < phi[cluster_reps.back()])
            cluster_reps.back() = i;
        last = i;
    }
    SteadyState ss;
    ss.multiple = cluster_reps.size() > 1;
    if (ss.multiple) {
        x_best = refine(cluster_reps.front());  // smallest x among tied minimizers
        phi_best = objective(x_best);
    }

    const SteadyInputResult si = steady_input(pb, x_best);
    ss.x_s = x_best;
    ss.u_s = *si.u;
    ss.cost_tilde = phi_best;
    ss.gamma = gamma;
    return ss;
}

// For linear-quadratic problems with Q >= 0, R > 0 the rotated cost is
// positive definite on the steady-state manifold, so the optimum is the
// origin.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> lqr_optimal_steady_state(
    const LinearQuadraticProblem& pb) {
    return {Eigen::VectorXd::Zero(pb.n()), Eigen::VectorXd::Zero(pb.m())};
}

struct SweepRow {
    double gamma = 0.0;
    double x_s = 0.0;
    double u_s = 0.0;
    double cost_tilde = 0.0;
};

// One fresh DP solve and steady-state problem per discount factor.
inline std::vector<SweepRow> sweep_gamma(const ScalarGridProblem& pb,
                                         const std::vector<double>& gammas, double tol = -1.0) {
    std::vector<SweepRow> rows;
    rows.reserve(gammas.size());
    for (double g : gammas) {
        const ScalarGridProblem p = pb.with_gamma(g);
        const ValueIterationResult vi = value_iteration(p, tol);
        const SteadyState ss = solve_optimal_steady_state(p, vi.value);
        rows.push_back(SweepRow{g, ss.x_s, ss.u_s, ss.cost_tilde});
    }
    return rows;
}

}  // namespace dempc
