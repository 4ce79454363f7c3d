#pragma once

// Cost transforms and dissipativity checks for scalar grid problems:
// the modified cost (storage-rotated, discounted), the rotated cost that
// removes the discount factor, grid-exhaustive verification of the two
// dissipativity conditions with a user-supplied storage function, and the
// equivalence/decrease identity checks tying them together.
//
// All checks run on normalized quantities. The stage cost is anchored at
// the optimal steady pair, L_bar = L - L(x_s, u_s). The value table is
// anchored at its own interpolated steady value, V_bar = V - V(x_s); at
// finite resolution this differs from L(x_s,u_s)/(1-gamma) by the DP
// discretization bias, and anchoring on the table keeps V_bar(x_s) = 0
// exactly, which the condition-(ii) margins require.

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include "dempc/dp.hpp"
#include "dempc/problem.hpp"
#include "dempc/sim.hpp"
#include "dempc/steady_state.hpp"

namespace dempc {

// Curvature scale bounding the linear-interpolation error of value-like
// functions on these grids; the grid slack step^2 * scale is the unit in
// which identity residuals are judged.
inline constexpr double kCurvatureScale = 100.0;

inline double interpolation_slack(const UniformGrid& g) {
    return g.step() * g.step() * kCurvatureScale;
}

// lambda(x) = -slope (x - x_s) + curvature (x - x_s)^2; lambda(x_s) = 0 by
// construction.
struct StorageFunction {
    double x_s = 0.0;
    double slope = 0.0;
    double curvature = 0.0;

    double operator()(double x) const {
        const double d = x - x_s;
        return -slope * d + curvature * d * d;
    }
};

// Storage with the gradient of the value function at the steady state,
// taken by central difference over h = h_cells grid steps.
inline StorageFunction make_gradient_storage(const GridValueFunction& v, double x_s,
                                             double curvature = 50.0, int h_cells = 4) {
    StorageFunction s;
    s.x_s = x_s;
    s.slope = numeric_gradient(v, x_s, h_cells * v.grid.step());
    s.curvature = curvature;
    return s;
}

struct CostNormalization {
    double x_s = 0.0;
    double u_s = 0.0;
    double cost_offset = 0.0;   // L(x_s, u_s)
    double value_offset = 0.0;  // V(x_s), interpolated on the grid
};

inline CostNormalization make_normalization(const ScalarGridProblem& pb,
                                            const GridValueFunction& v, const SteadyState& ss) {
    CostNormalization n;
    n.x_s = ss.x_s;
    n.u_s = ss.u_s;
    n.cost_offset = pb.stage_cost(ss.x_s, ss.u_s);
    n.value_offset = evaluate_value(v, ss.x_s);
    return n;
}

inline double normalized_cost(const ScalarGridProblem& pb, const CostNormalization& n, double x,
                              double u) {
    return pb.stage_cost(x, u) - n.cost_offset;
}

inline double normalized_value(const GridValueFunction& v, const CostNormalization& n, double x) {
    return evaluate_value(v, x) - n.value_offset;
}

// L_hat(x,u) = L_bar(x,u) + lambda(x) - gamma lambda(f(x,u))
inline double modified_cost_hat(const ScalarGridProblem& pb, const StorageFunction& storage,
                                const CostNormalization& n, double x, double u) {
    return normalized_cost(pb, n, x, u) + storage(x) - pb.gamma() * storage(pb.dynamics(x, u));
}

// L_tilde(x,u) = L_bar(x,u) + (gamma-1) V_bar(f(x,u))
inline double rotated_cost_tilde(const ScalarGridProblem& pb, const GridValueFunction& v,
                                 const CostNormalization& n, double x, double u) {
    return normalized_cost(pb, n, x, u) +
           (pb.gamma() - 1.0) * normalized_value(v, n, pb.dynamics(x, u));
}

// L_hat_tilde(x,u) = L_hat(x,u) + (gamma-1) (V_bar + lambda)(f(x,u)); the
// rotated form of the modified problem, whose value function is V_bar + lambda.
inline double rotated_cost_hat_tilde(const ScalarGridProblem& pb, const StorageFunction& storage,
                                     const GridValueFunction& v, const CostNormalization& n,
                                     double x, double u) {
    const double f = pb.dynamics(x, u);
    return modified_cost_hat(pb, storage, n, x, u) +
           (pb.gamma() - 1.0) * (normalized_value(v, n, f) + storage(f));
}

struct GridWitness {
    double x = 0.0;
    double u = 0.0;
};

struct GridSdsdReport {
    double margin_i = 0.0;   // min over grid pairs of condition-(i) LHS - eps (x-x_s)^2
    double margin_ii = 0.0;  // same for condition (ii)
    GridWitness witness_i;
    GridWitness witness_ii;
    double epsilon = 0.0;
    double eps_max_i = 0.0;  // largest eps for which the condition holds on the grid
    double eps_max_ii = 0.0;
};

// Exhaustive evaluation of both dissipativity conditions on all grid pairs.
inline GridSdsdReport check_sdsd_on_grid(const ScalarGridProblem& pb,
                                         const StorageFunction& storage,
                                         const GridValueFunction& v, const CostNormalization& n,
                                         double epsilon) {
    if (epsilon < 0.0) throw std::invalid_argument("check_sdsd_on_grid: epsilon must be >= 0");
    GridSdsdReport rep;
    rep.epsilon = epsilon;
    rep.margin_i = std::numeric_limits<double>::infinity();
    rep.margin_ii = std::numeric_limits<double>::infinity();
    rep.eps_max_i = std::numeric_limits<double>::infinity();
    rep.eps_max_ii = std::numeric_limits<double>::infinity();
    const double gamma = pb.gamma();
    const UniformGrid xg = state_grid(pb);
    const UniformGrid ug = input_grid(pb);
    const double s2_floor = 1e-12 * xg.step() * xg.step();
    for (int i = 0; i < xg.n; ++i) {
        const double x = xg.node(i);
        const double s2 = (x - storage.x_s) * (x - storage.x_s);
        for (int j = 0; j < ug.n; ++j) {
            const double u = ug.node(j);
            const double f = pb.dynamics(x, u);
            const double lbar = normalized_cost(pb, n, x, u);
            const double lhs_i = lbar + storage(x) - gamma * storage(f);
            const double lhs_ii =
                lbar + storage(x) - storage(f) + (gamma - 1.0) * normalized_value(v, n, f);
            if (lhs_i - epsilon * s2 < rep.margin_i) {
                rep.margin_i = lhs_i - epsilon * s2;
                rep.witness_i = GridWitness{x, u};
            }
            if (lhs_ii - epsilon * s2 < rep.margin_ii) {
                rep.margin_ii = lhs_ii - epsilon * s2;
                rep.witness_ii = GridWitness{x, u};
            }
            if (s2 > s2_floor) {
                rep.eps_max_i = std::min(rep.eps_max_i, lhs_i / s2);
                rep.eps_max_ii = std::min(rep.eps_max_ii, lhs_ii / s2);
            }
        }
    }
    return rep;
}

// Sweep tables for the modified cost. The storage term at the successor is
// evaluated through the same linear interpolation as the value table, so
// the modified problem's grid fixed point is exactly V + lambda and the
// greedy argmins coincide with the base problem's at every node.
inline DpTables modified_cost_tables(const ScalarGridProblem& pb, const StorageFunction& storage,
                                     bool grid_consistent = true) {
    DpTables t = make_dp_tables(pb);
    std::vector<double> lam_nodes(static_cast<std::size_t>(t.xg.n));
    for (int k = 0; k < t.xg.n; ++k) lam_nodes[static_cast<std::size_t>(k)] = storage(t.xg.node(k));
    const int nu = t.nu();
    for (int i = 0; i < t.nx(); ++i) {
        const double x = t.xg.node(i);
        for (int j = 0; j < nu; ++j) {
            const std::size_t idx = static_cast<std::size_t>(i) * nu + j;
            double lam_f;
            if (grid_consistent) {
                const int k = t.succ_cell[idx];
                const double w = t.succ_weight[idx];
                lam_f = (1.0 - w) * lam_nodes[k] + w * lam_nodes[k + 1];
            } else {
                lam_f = storage(pb.dynamics(x, t.ug.node(j)));
            }
            t.cost[idx] += lam_nodes[static_cast<std::size_t>(i)] - t.gamma * lam_f;
        }
    }
    return t;
}

// max over nodes of |V_hat - V - lambda|; the storage telescopes out of the
// modified problem, so this measures how faithfully the two DP solutions
// realize that identity.
inline double check_value_shift(const StorageFunction& storage, const GridValueFunction& v,
                                const GridValueFunction& v_hat) {
    if (v.grid.n != v_hat.grid.n || v.grid.lo != v_hat.grid.lo || v.grid.hi != v_hat.grid.hi)
        throw std::invalid_argument("check_value_shift: value grids do not match");
    double worst = 0.0;
    for (int i = 0; i < v.grid.n; ++i) {
        const double dev = std::abs(v_hat.values[i] - v.values[i] - storage(v.grid.node(i)));
        worst = std::max(worst, dev);
    }
    return worst;
}

struct TelescopicReport {
    double residual = 0.0;      // | sum L_tilde - V_bar(x0) |
    double rotated_sum = 0.0;
    double value_at_x0 = 0.0;
    double value_at_xN = 0.0;
};

// Undiscounted sum of the rotated cost along a closed-loop rollout; by the
// telescopic identity it reproduces the discounted value at x0 up to the
// tail value and grid slack.
template <typename PolicyFn>
    requires std::is_invocable_r_v<double, PolicyFn&, double>
TelescopicReport telescopic_check(const ScalarGridProblem& pb, const GridValueFunction& v,
                                  const CostNormalization& n, PolicyFn&& policy, double x0,
                                  int N) {
    const GridTrajectory traj = simulate(pb, policy, x0, N, n.x_s);
    TelescopicReport rep;
    double sum = 0.0;
    for (int k = 0; k < N; ++k) {
        const double lbar = normalized_cost(pb, n, traj.states[k], traj.inputs[k]);
        sum += lbar + (pb.gamma() - 1.0) * normalized_value(v, n, traj.states[k + 1]);
    }
    rep.rotated_sum = sum;
    rep.value_at_x0 = normalized_value(v, n, x0);
    rep.value_at_xN = normalized_value(v, n, traj.states.back());
    rep.residual = std::abs(sum - rep.value_at_x0);
    return rep;
}

inline TelescopicReport telescopic_check(const ScalarGridProblem& pb, const GridValueFunction& v,
                                         const CostNormalization& n, const GridPolicy& policy,
                                         double x0, int N) {
    const UniformGrid xg = state_grid(pb);
    return telescopic_check(
        pb, v, n, [&](double x) { return policy.inputs[static_cast<std::size_t>(xg.nearest(x))]; },
        x0, N);
}

struct DecreaseReport {
    double worst_violation = 0.0;  // max over steps of dV_hat + eps (x_k - x_s)^2
    int worst_step = -1;
    int steps = 0;
};

// Checks the Lyapunov decrease V_hat(x_{k+1}) - V_hat(x_k) <= -eps (x_k-x_s)^2
// along a rollout, with V_hat = V_bar + lambda.
template <typename PolicyFn>
    requires std::is_invocable_r_v<double, PolicyFn&, double>
DecreaseReport lyapunov_decrease_check(const ScalarGridProblem& pb, const StorageFunction& storage,
                                       const GridValueFunction& v, const CostNormalization& n,
                                       PolicyFn&& policy, double x0, int N, double epsilon) {
    const GridTrajectory traj = simulate(pb, policy, x0, N, n.x_s);
    DecreaseReport rep;
    rep.steps = N;
    rep.worst_violation = -std::numeric_limits<double>::infinity();
    auto vhat = [&](double x) { return normalized_value(v, n, x) + storage(x); };
    double prev = vhat(traj.states[0]);
    for (int k = 0; k < N; ++k) {
        const double next = vhat(traj.states[k + 1]);
        const double s2 = (traj.states[k] - n.x_s) * (traj.states[k] - n.x_s);
        const double viol = (next - prev) + epsilon * s2;
        if (viol > rep.worst_violation) {
            rep.worst_violation = viol;
            rep.worst_step = k;
        }
        prev = next;
    }
    return rep;
}

inline DecreaseReport lyapunov_decrease_check(const ScalarGridProblem& pb,
                                              const StorageFunction& storage,
                                              const GridValueFunction& v,
                                              const CostNormalization& n, const GridPolicy& policy,
                                              double x0, int N, double epsilon) {
    const UniformGrid xg = state_grid(pb);
    return lyapunov_decrease_check(
        pb, storage, v, n,
        [&](double x) { return policy.inputs[static_cast<std::size_t>(xg.nearest(x))]; }, x0, N,
        epsilon);
}

// Decrease check over precomputed value/distance sequences; used for the
// linear-quadratic analogues where the value function is a quadratic form.
inline double worst_decrease_violation(const std::vector<double>& vhat,
                                       const std::vector<double>& dist, double epsilon) {
    if (vhat.size() != dist.size() || vhat.size() < 2)
        throw std::invalid_argument("worst_decrease_violation: inconsistent sequences");
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k + 1 < vhat.size(); ++k)
        worst = std::max(worst, vhat[k + 1] - vhat[k] + epsilon * dist[k] * dist[k]);
    return worst;
}

struct GaitsgoryReport {
    double worst_slack_inf = 0.0;     // min over nodes of C inf_u L_hat - V_hat
    double worst_slack_policy = 0.0;  // same with u = policy(x)
    int nodes_checked = 0;
};

// Pointwise check of the constant-bound conditions V_hat <= C inf_u L_hat
// and V_hat <= C L_hat(x, pi(x)) on grid states in the annulus
// phi <= |x - x_s| <= Phi. Requires 1 <= C < 1/(1-gamma).
inline GaitsgoryReport check_gaitsgory_pointwise(const ScalarGridProblem& pb,
                                                 const StorageFunction& storage,
                                                 const GridValueFunction& v,
                                                 const CostNormalization& n,
                                                 const GridPolicy& policy, double C, double phi,
                                                 double Phi) {
    if (C < 1.0 || C >= 1.0 / (1.0 - pb.gamma()))
        throw std::invalid_argument("check_gaitsgory_pointwise: need 1 <= C < 1/(1-gamma)");
    if (!(phi >= 0.0) || !(Phi > phi))
        throw std::invalid_argument("check_gaitsgory_pointwise: need 0 <= phi < Phi");
    GaitsgoryReport rep;
    rep.worst_slack_inf = std::numeric_limits<double>::infinity();
    rep.worst_slack_policy = std::numeric_limits<double>::infinity();
    const UniformGrid xg = state_grid(pb);
    const UniformGrid ug = input_grid(pb);
    for (int i = 0; i < xg.n; ++i) {
        const double x = xg.node(i);
        const double dist = std::abs(x - storage.x_s);
        if (dist < phi || dist > Phi) continue;
        ++rep.nodes_checked;
        const double vhat = normalized_value(v, n, x) + storage(x);
        double inf_lhat = std::numeric_limits<double>::infinity();
        for (int j = 0; j < ug.n; ++j)
            inf_lhat = std::min(inf_lhat, modified_cost_hat(pb, storage, n, x, ug.node(j)));
        const double lhat_pol =
            modified_cost_hat(pb, storage, n, x, policy.inputs[static_cast<std::size_t>(i)]);
        rep.worst_slack_inf = std::min(rep.worst_slack_inf, C * inf_lhat - vhat);
        rep.worst_slack_policy = std::min(rep.worst_slack_policy, C * lhat_pol - vhat);
    }
    return rep;
}

}  // namespace dempc
