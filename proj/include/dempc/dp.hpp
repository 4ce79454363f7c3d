#pragma once

// Discounted value iteration on a state-input grid for scalar problems.
// Successor states are evaluated by linear interpolation of the value
// table, which preserves monotonicity and contraction of the Bellman
// operator. Sweeps are synchronous (Jacobi), so node updates within one
// sweep are order-independent.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "dempc/problem.hpp"

namespace dempc {

class ValueIterationDivergence : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct UniformGrid {
    double lo = 0.0;
    double hi = 1.0;
    int n = 2;

    double step() const { return (hi - lo) / (n - 1); }
    double node(int i) const { return lo + (hi - lo) * i / (n - 1); }
    bool contains(double x) const { return x >= lo && x <= hi; }

    // Index of the cell [node(k), node(k+1)] containing x, clamped to the grid.
    int cell(double x) const {
        int k = static_cast<int>(std::floor((x - lo) / step()));
        if (k < 0) k = 0;
        if (k > n - 2) k = n - 2;
        return k;
    }

    int nearest(double x) const {
        int k = static_cast<int>(std::lround((x - lo) / step()));
        if (k < 0) k = 0;
        if (k > n - 1) k = n - 1;
        return k;
    }
};

inline UniformGrid state_grid(const ScalarGridProblem& pb) {
    return UniformGrid{pb.x_interval().lo, pb.x_interval().hi, pb.nx()};
}

inline UniformGrid input_grid(const ScalarGridProblem& pb) {
    return UniformGrid{pb.u_interval().lo, pb.u_interval().hi, pb.nu()};
}

struct GridValueFunction {
    UniformGrid grid;
    std::vector<double> values;
    double gamma = 0.0;
    double residual = 0.0;  // final sup-norm Bellman update
    int iterations = 0;
};

struct GridPolicy {
    std::vector<int> indices;    // greedy input-grid index per state node
    std::vector<double> inputs;  // corresponding input values
};

// Piecewise-linear interpolation; exact at the nodes.
inline double evaluate_value(const GridValueFunction& v, double x) {
    if (x < v.grid.lo || x > v.grid.hi)
        throw std::out_of_range("evaluate_value: x=" + std::to_string(x) + " outside [" +
                                std::to_string(v.grid.lo) + ", " + std::to_string(v.grid.hi) + "]");
    const int k = v.grid.cell(x);
    const double w = (x - v.grid.node(k)) / v.grid.step();
    return (1.0 - w) * v.values[k] + w * v.values[k + 1];
}

// Central difference (V(x+h) - V(x-h)) / (2h). Requires h to span at least
// two grid cells so the difference crosses distinct interpolation cells.
inline double numeric_gradient(const GridValueFunction& v, double x, double h) {
    const double step = v.grid.step();
    if (h < 2.0 * step * (1.0 - 1e-12))
        throw std::invalid_argument("numeric_gradient: h must be >= 2 grid steps");
    return (evaluate_value(v, x + h) - evaluate_value(v, x - h)) / (2.0 * h);
}

// Precomputed sweep tables: stage cost and successor interpolation data for
// every grid pair, laid out row-major as [state * nu + input].
struct DpTables {
    UniformGrid xg;
    UniformGrid ug;
    double gamma = 0.0;
    std::vector<double> cost;
    std::vector<int> succ_cell;
    std::vector<double> succ_weight;  // weight of the upper cell node

    int nx() const { return xg.n; }
    int nu() const { return ug.n; }
};

template <typename CostFn>
DpTables make_dp_tables(const ScalarGridProblem& pb, CostFn&& stage_cost) {
    DpTables t;
    t.xg = state_grid(pb);
    t.ug = input_grid(pb);
    t.gamma = pb.gamma();
    const int nx = t.nx(), nu = t.nu();
    t.cost.resize(static_cast<std::size_t>(nx) * nu);
    t.succ_cell.resize(t.cost.size());
    t.succ_weight.resize(t.cost.size());
    for (int i = 0; i < nx; ++i) {
        const double x = t.xg.node(i);
        for (int j = 0; j < nu; ++j) {
            const double u = t.ug.node(j);
            const double f = pb.dynamics(x, u);
            const std::size_t idx = static_cast<std::size_t>(i) * nu + j;
            const int k = t.xg.cell(f);
            t.cost[idx] = stage_cost(x, u);
            t.succ_cell[idx] = k;
            t.succ_weight[idx] = (f - t.xg.node(k)) / t.xg.step();
        }
    }
    return t;
}

inline DpTables make_dp_tables(const ScalarGridProblem& pb) {
    return make_dp_tables(pb, [&](double x, double u) { return pb.stage_cost(x, u); });
}

// One synchronous Bellman backup; returns the sup-norm update. Ties in the
// input argmin resolve to the smallest input.
inline double bellman_sweep(const DpTables& t, const std::vector<double>& v_in,
                            std::vector<double>& v_out, std::vector<int>* argmin = nullptr) {
    const int nx = t.nx(), nu = t.nu();
    double sup = 0.0;
    for (int i = 0; i < nx; ++i) {
        const std::size_t row = static_cast<std::size_t>(i) * nu;
        double best = std::numeric_limits<double>::infinity();
        int best_j = 0;
        for (int j = 0; j < nu; ++j) {
            const std::size_t idx = row + j;
            const int k = t.succ_cell[idx];
            const double w = t.succ_weight[idx];
            const double val =
                t.cost[idx] + t.gamma * ((1.0 - w) * v_in[k] + w * v_in[k + 1]);
            if (val < best) {
                best = val;
                best_j = j;
            }
        }
        if (argmin) (*argmin)[i] = best_j;
        sup = std::max(sup, std::abs(best - v_in[i]));
        v_out[i] = best;
    }
    return sup;
}

struct ValueIterationResult {
    GridValueFunction value;
    GridPolicy policy;
    std::vector<double> residual_history;
};

inline double default_vi_tolerance(const DpTables& t) {
    double linf = 0.0;
    for (double c : t.cost) linf = std::max(linf, std::abs(c));
    return 1e-8 * std::max(1.0, linf) / (1.0 - t.gamma);
}

inline ValueIterationResult value_iteration_on_tables(const DpTables& t, double tol,
                                                      int max_iter = 200000) {
    require_strict_discount(t.gamma, "value_iteration");
    const int nx = t.nx();
    std::vector<double> v(nx, 0.0), v_next(nx, 0.0);
    std::vector<double> history;
    double res = std::numeric_limits<double>::infinity();
    bool converged = false;
    int it = 0;
    for (; it < max_iter; ++it) {
        res = bellman_sweep(t, v, v_next);
        history.push_back(res);
        v.swap(v_next);
        if (res <= tol) {
            converged = true;
            ++it;
            break;
        }
    }
    if (!converged)
        throw ValueIterationDivergence("value_iteration: residual " + std::to_string(res) +
                                       " > tol " + std::to_string(tol) + " after " +
                                       std::to_string(it) + " iterations");

    ValueIterationResult out;
    out.value.grid = t.xg;
    out.value.values = std::move(v);
    out.value.gamma = t.gamma;
    out.value.residual = res;
    out.value.iterations = it;
    out.residual_history = std::move(history);

    // greedy extraction against the returned table
    std::vector<int> argmin(nx, 0);
    std::vector<double> scratch(nx, 0.0);
    bellman_sweep(t, out.value.values, scratch, &argmin);
    out.policy.indices = std::move(argmin);
    out.policy.inputs.resize(nx);
    for (int i = 0; i < nx; ++i) out.policy.inputs[i] = t.ug.node(out.policy.indices[i]);
    return out;
}

inline ValueIterationResult value_iteration(const ScalarGridProblem& pb, double tol = -1.0,
                                            int max_iter = 200000) {
    const DpTables t = make_dp_tables(pb);
    if (tol < 0.0) tol = default_vi_tolerance(t);
    return value_iteration_on_tables(t, tol, max_iter);
}

inline GridPolicy greedy_policy(const ScalarGridProblem& pb, const GridValueFunction& v) {
    if (v.grid.n != pb.nx())
        throw std::invalid_argument("greedy_policy: value grid does not match the problem grid");
    const DpTables t = make_dp_tables(pb);
    const int nx = t.nx();
    std::vector<int> argmin(nx, 0);
    std::vector<double> scratch(nx, 0.0);
    bellman_sweep(t, v.values, scratch, &argmin);
    GridPolicy pol;
    pol.indices = std::move(argmin);
    pol.inputs.resize(nx);
    for (int i = 0; i < nx; ++i) pol.inputs[i] = t.ug.node(pol.indices[i]);
    return pol;
}

}  // namespace dempc
