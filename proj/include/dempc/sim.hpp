#pragma once

// Closed-loop simulation under grid policies or LQR gains, with
// convergence diagnostics. Grid policies are evaluated by nearest-node
// lookup so the simulated policy is the certified one up to grid
// resolution; interpolated inputs need not be Bellman-greedy.

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "dempc/dp.hpp"
#include "dempc/problem.hpp"

namespace dempc {

class RangeExitError : public std::runtime_error {
public:
    RangeExitError(double state, int step)
        : std::runtime_error("simulate: state " + std::to_string(state) +
                             " left the grid range at step " + std::to_string(step)),
          step_(step) {}

    int step() const { return step_; }

private:
    int step_;
};

struct GridTrajectory {
    std::vector<double> states;     // x_0 .. x_N
    std::vector<double> inputs;     // u_0 .. u_{N-1}
    std::vector<double> distances;  // |x_k - x_s|
};

struct LqrTrajectory {
    std::vector<Eigen::VectorXd> states;
    std::vector<Eigen::VectorXd> inputs;
    std::vector<double> distances;  // ||x_k|| (steady state at the origin)
};

// Rollout x+ = f(x, policy(x)). Throws RangeExitError (with the step index)
// if the state leaves the problem's state interval.
template <typename PolicyFn>
    requires std::is_invocable_r_v<double, PolicyFn&, double>
GridTrajectory simulate(const ScalarGridProblem& pb, PolicyFn&& policy, double x0, int N,
                        double x_s) {
    if (!pb.x_interval().contains(x0))
        throw std::out_of_range("simulate: x0 outside the state interval");
    GridTrajectory traj;
    traj.states.reserve(N + 1);
    traj.inputs.reserve(N);
    traj.distances.reserve(N + 1);
    double x = x0;
    traj.states.push_back(x);
    traj.distances.push_back(std::abs(x - x_s));
    for (int k = 0; k < N; ++k) {
        const double u = policy(x);
        const double xn = pb.dynamics(x, u);
        if (!pb.x_interval().contains(xn)) throw RangeExitError(xn, k);
        traj.inputs.push_back(u);
        traj.states.push_back(xn);
        traj.distances.push_back(std::abs(xn - x_s));
        x = xn;
    }
    return traj;
}

inline GridTrajectory simulate(const ScalarGridProblem& pb, const GridPolicy& policy, double x0,
                               int N, double x_s) {
    const UniformGrid xg = state_grid(pb);
    if (policy.inputs.size() != static_cast<std::size_t>(xg.n))
        throw std::invalid_argument("simulate: policy size does not match the state grid");
    return simulate(
        pb, [&](double x) { return policy.inputs[static_cast<std::size_t>(xg.nearest(x))]; }, x0,
        N, x_s);
}

inline LqrTrajectory simulate(const LinearQuadraticProblem& pb, const Eigen::MatrixXd& K,
                              const Eigen::VectorXd& x0, int N) {
    if (K.rows() != pb.m() || K.cols() != pb.n())
        throw std::invalid_argument("simulate: K must be m x n");
    LqrTrajectory traj;
    traj.states.reserve(N + 1);
    traj.inputs.reserve(N);
    traj.distances.reserve(N + 1);
    Eigen::VectorXd x = x0;
    traj.states.push_back(x);
    traj.distances.push_back(x.norm());
    for (int k = 0; k < N; ++k) {
        const Eigen::VectorXd u = K * x;
        x = pb.dynamics(x, u);
        traj.inputs.push_back(u);
        traj.states.push_back(x);
        traj.distances.push_back(x.norm());
    }
    return traj;
}

struct ConvergenceMetrics {
    bool converged = false;
    double final_distance = 0.0;
    double decay_ratio = 0.0;  // geometric fit over the distance tail
};

inline ConvergenceMetrics convergence_metrics(const std::vector<double>& distances,
                                              double tolerance) {
    if (distances.empty()) throw std::invalid_argument("convergence_metrics: empty trajectory");
    ConvergenceMetrics m;
    m.final_distance = distances.back();
    m.converged = m.final_distance <= tolerance;

    // least-squares slope of log(distance) over the tail
    const std::size_t n = distances.size();
    const std::size_t tail = std::min<std::size_t>(std::max<std::size_t>(n / 2, 2), 100);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t cnt = 0;
    for (std::size_t k = n - tail; k < n; ++k) {
        if (distances[k] <= 0.0) continue;
        const double xk = static_cast<double>(k);
        const double yk = std::log(distances[k]);
        sx += xk;
        sy += yk;
        sxx += xk * xk;
        sxy += xk * yk;
        ++cnt;
    }
    if (cnt >= 2 && sxx * cnt - sx * sx > 0.0)
        m.decay_ratio = std::exp((sxy * cnt - sx * sy) / (sxx * cnt - sx * sx));
    return m;
}

}  // namespace dempc
