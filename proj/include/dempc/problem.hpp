#pragma once

// Problem definitions: discounted linear-quadratic problems and scalar
// grid problems (built-in parametric families or parsed expressions),
// with all invariants checked at construction.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "dempc/expression.hpp"

namespace dempc {

struct DiscountFactor {
    double value = 0.0;

    explicit DiscountFactor(double gamma, bool allow_undiscounted_limit = true) : value(gamma) {
        if (!(gamma > 0.0) || gamma > 1.0 || (!allow_undiscounted_limit && gamma == 1.0))
            throw std::invalid_argument("gamma: discount factor must lie in (0,1" +
                                        std::string(allow_undiscounted_limit ? "]" : ")") +
                                        ", got " + std::to_string(gamma));
    }
};

inline void require_strict_discount(double gamma, const char* where) {
    if (!(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument(std::string(where) + " requires gamma in (0,1), got " +
                                    std::to_string(gamma));
}

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double v) const { return v >= lo && v <= hi; }
    double length() const { return hi - lo; }
};

inline void check_interval(const Interval& iv, const std::string& name) {
    if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || !(iv.lo < iv.hi))
        throw std::invalid_argument(name + ": interval must be finite and nonempty");
}

namespace detail {

inline bool is_symmetric(const Eigen::MatrixXd& m, double tol) {
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * (1.0 + m.cwiseAbs().maxCoeff());
}

inline double min_eigenvalue(const Eigen::MatrixXd& m) {
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues().minCoeff();
}

}  // namespace detail

// Linear dynamics x+ = Ax + Bu with stage cost x'Qx + u'Ru and discount
// factor gamma. The boxes delimit the analysis region used by sampling
// checks; they are not enforced by the Riccati machinery.
struct LinearQuadraticProblem {
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    Eigen::MatrixXd Q;
    Eigen::MatrixXd R;
    double gamma = 0.0;
    std::vector<Interval> state_box;
    std::vector<Interval> input_box;

    LinearQuadraticProblem(Eigen::MatrixXd A_, Eigen::MatrixXd B_, Eigen::MatrixXd Q_,
                           Eigen::MatrixXd R_, double gamma_,
                           std::vector<Interval> state_box_ = {},
                           std::vector<Interval> input_box_ = {})
        : A(std::move(A_)),
          B(std::move(B_)),
          Q(std::move(Q_)),
          R(std::move(R_)),
          gamma(gamma_),
          state_box(std::move(state_box_)),
          input_box(std::move(input_box_)) {
        const auto n = A.rows();
        const auto m = B.cols();
        if (A.cols() != n) throw std::invalid_argument("A: must be square");
        if (B.rows() != n) throw std::invalid_argument("B: row count must match A");
        if (Q.rows() != n || Q.cols() != n) throw std::invalid_argument("Q: must be n x n");
        if (R.rows() != m || R.cols() != m) throw std::invalid_argument("R: must be m x m");
        constexpr double sym_tol = 1e-12;
        if (!detail::is_symmetric(Q, sym_tol)) throw std::invalid_argument("Q: must be symmetric");
        if (!detail::is_symmetric(R, sym_tol)) throw std::invalid_argument("R: must be symmetric");
        if (detail::min_eigenvalue(Q) < -1e-12 * (1.0 + Q.cwiseAbs().maxCoeff()))
            throw std::invalid_argument("Q: must be positive semidefinite");
        if (detail::min_eigenvalue(R) <= 0.0)
            throw std::invalid_argument("R: must be positive definite");
        DiscountFactor check(gamma);  // (0,1]; gamma=1 only for undiscounted-limit checks
        if (state_box.empty()) state_box.assign(static_cast<std::size_t>(n), Interval{-1.0, 1.0});
        if (input_box.empty()) input_box.assign(static_cast<std::size_t>(m), Interval{-1.0, 1.0});
        if (state_box.size() != static_cast<std::size_t>(n))
            throw std::invalid_argument("state_box: must have one interval per state");
        if (input_box.size() != static_cast<std::size_t>(m))
            throw std::invalid_argument("input_box: must have one interval per input");
        for (const auto& iv : state_box) check_interval(iv, "state_box");
        for (const auto& iv : input_box) check_interval(iv, "input_box");
    }

    Eigen::Index n() const { return A.rows(); }
    Eigen::Index m() const { return B.cols(); }

    Eigen::VectorXd dynamics(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
        return A * x + B * u;
    }

    double stage_cost(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
        return x.dot(Q * x) + u.dot(R * u);
    }
};

// Scalar dynamics family f(x,u) = a*u*(1-x) + b*x.
struct DynamicsFamily {
    double a = 0.0;
    double b = 0.0;

    double operator()(double x, double u) const { return a * u * (1.0 - x) + b * x; }
};

// Scalar stage-cost family L(x,u) = c1*u + c2*u*x + c3*(u-d)^2.
struct CostFamily {
    double c1 = 0.0;
    double c2 = 0.0;
    double c3 = 0.0;
    double d = 0.0;

    double operator()(double x, double u) const {
        return c1 * u + c2 * u * x + c3 * (u - d) * (u - d);
    }
};

// Scalar nonlinear problem on a rectangular state/input box with grid
// resolutions used by dynamic programming. The dynamics must map every
// grid pair back into the state interval (checked exhaustively here).
class ScalarGridProblem {
public:
    using Dynamics = std::variant<DynamicsFamily, Expression>;
    using Cost = std::variant<CostFamily, Expression>;

    ScalarGridProblem(Dynamics dynamics, Cost cost, Interval x_interval, Interval u_interval,
                      int nx, int nu, double gamma)
        : dynamics_(std::move(dynamics)),
          cost_(std::move(cost)),
          x_interval_(x_interval),
          u_interval_(u_interval),
          nx_(nx),
          nu_(nu),
          gamma_(gamma) {
        check_interval(x_interval_, "x_interval");
        check_interval(u_interval_, "u_interval");
        if (nx_ < 2) throw std::invalid_argument("nx: need at least 2 grid points");
        if (nu_ < 2) throw std::invalid_argument("nu: need at least 2 grid points");
        DiscountFactor check(gamma_);
        validate_on_grid();
    }

    double dynamics(double x, double u) const {
        return std::visit([&](const auto& f) { return f(x, u); }, dynamics_);
    }

    double stage_cost(double x, double u) const {
        return std::visit([&](const auto& l) { return l(x, u); }, cost_);
    }

    const Interval& x_interval() const { return x_interval_; }
    const Interval& u_interval() const { return u_interval_; }
    int nx() const { return nx_; }
    int nu() const { return nu_; }
    double gamma() const { return gamma_; }

    double x_node(int i) const {
        return x_interval_.lo + (x_interval_.hi - x_interval_.lo) * i / (nx_ - 1);
    }
    double u_node(int j) const {
        return u_interval_.lo + (u_interval_.hi - u_interval_.lo) * j / (nu_ - 1);
    }

    const DynamicsFamily* dynamics_family() const { return std::get_if<DynamicsFamily>(&dynamics_); }

    // Extremes of f over all grid pairs, recorded during validation.
    double dynamics_grid_min() const { return f_min_; }
    double dynamics_grid_max() const { return f_max_; }

    ScalarGridProblem with_gamma(double gamma) const {
        ScalarGridProblem p = *this;
        DiscountFactor check(gamma);
        p.gamma_ = gamma;
        return p;
    }

    ScalarGridProblem with_resolution(int nx, int nu) const {
        return ScalarGridProblem(dynamics_, cost_, x_interval_, u_interval_, nx, nu, gamma_);
    }

    ScalarGridProblem with_cost(Cost cost) const {
        return ScalarGridProblem(dynamics_, std::move(cost), x_interval_, u_interval_, nx_, nu_,
                                 gamma_);
    }

private:
    void validate_on_grid() {
        f_min_ = std::numeric_limits<double>::infinity();
        f_max_ = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < nx_; ++i) {
            const double x = x_node(i);
            for (int j = 0; j < nu_; ++j) {
                const double u = u_node(j);
                const double f = dynamics(x, u);
                const double l = stage_cost(x, u);
                if (!std::isfinite(f) || !x_interval_.contains(f))
                    throw std::invalid_argument(
                        "dynamics: f(" + std::to_string(x) + ", " + std::to_string(u) + ") = " +
                        std::to_string(f) + " leaves the state interval");
                if (!std::isfinite(l))
                    throw std::invalid_argument("stage_cost: not finite at (" + std::to_string(x) +
                                                ", " + std::to_string(u) + ")");
                f_min_ = std::min(f_min_, f);
                f_max_ = std::max(f_max_, f);
            }
        }
    }

    Dynamics dynamics_;
    Cost cost_;
    Interval x_interval_;
    Interval u_interval_;
    int nx_;
    int nu_;
    double gamma_;
    double f_min_ = 0.0;
    double f_max_ = 0.0;
};

// Checked evaluation helpers. With strict_box the pair (x,u) must lie in
// the problem's box.
inline double evaluate_dynamics(const ScalarGridProblem& p, double x, double u,
                                bool strict_box = false) {
    if (strict_box && (!p.x_interval().contains(x) || !p.u_interval().contains(u)))
        throw std::out_of_range("evaluate_dynamics: (x,u) outside the problem box");
    return p.dynamics(x, u);
}

inline double evaluate_cost(const ScalarGridProblem& p, double x, double u,
                            bool strict_box = false) {
    if (strict_box && (!p.x_interval().contains(x) || !p.u_interval().contains(u)))
        throw std::out_of_range("evaluate_cost: (x,u) outside the problem box");
    return p.stage_cost(x, u);
}

inline Eigen::VectorXd evaluate_dynamics(const LinearQuadraticProblem& p, const Eigen::VectorXd& x,
                                         const Eigen::VectorXd& u) {
    return p.dynamics(x, u);
}

inline double evaluate_cost(const LinearQuadraticProblem& p, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& u) {
    return p.stage_cost(x, u);
}

}  // namespace dempc
