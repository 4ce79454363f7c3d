#pragma once

// Discounted LQR: value matrix and gain via fixed-point iteration of the
// discounted Riccati map, closed-loop spectral radius, and bisection for
// critical discount factors.
//
// The discounted Bellman fixed point P = Q + g A'PA - g^2 A'PB (R + g B'PB)^-1 B'PA
// coincides with the undiscounted Riccati equation for (sqrt(g) A, sqrt(g) B).

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "dempc/problem.hpp"

namespace dempc {

class RiccatiDivergence : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class BracketingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RiccatiSolution {
    Eigen::MatrixXd P;  // value matrix, V(x) = x'Px
    Eigen::MatrixXd K;  // policy gain, u = Kx
    double residual = 0.0;
    int iterations = 0;
};

namespace detail {

inline Eigen::MatrixXd riccati_rhs(const LinearQuadraticProblem& pb, const Eigen::MatrixXd& P) {
    const double g = pb.gamma;
    const Eigen::MatrixXd S = pb.R + g * pb.B.transpose() * P * pb.B;
    const Eigen::MatrixXd BPA = pb.B.transpose() * P * pb.A;
    return pb.Q + g * pb.A.transpose() * P * pb.A -
           g * g * pb.A.transpose() * P * pb.B * S.ldlt().solve(BPA);
}

}  // namespace detail

inline Eigen::MatrixXd riccati_gain(const LinearQuadraticProblem& pb, const Eigen::MatrixXd& P) {
    const double g = pb.gamma;
    const Eigen::MatrixXd S = pb.R + g * pb.B.transpose() * P * pb.B;
    return -g * S.ldlt().solve(pb.B.transpose() * P * pb.A);
}

// Fixed-point iteration from P0 = Q. Throws RiccatiDivergence when the
// iteration fails to settle, which signals that the discounted pair is not
// stabilizable/detectable at this discount factor.
inline RiccatiSolution solve_dare(const LinearQuadraticProblem& pb, double tol = 1e-12,
                                  int max_iter = 100000) {
    Eigen::MatrixXd P = pb.Q;
    double diff = std::numeric_limits<double>::infinity();
    int it = 0;
    for (; it < max_iter; ++it) {
        Eigen::MatrixXd Pn = detail::riccati_rhs(pb, P);
        Pn = 0.5 * (Pn + Pn.transpose()).eval();
        diff = (Pn - P).cwiseAbs().maxCoeff();
        P = Pn;
        if (!std::isfinite(diff)) break;
        if (diff <= tol) {
            RiccatiSolution sol;
            sol.P = P;
            sol.K = riccati_gain(pb, P);
            sol.residual = (P - detail::riccati_rhs(pb, P)).cwiseAbs().maxCoeff();
            sol.iterations = it + 1;
            return sol;
        }
    }
    throw RiccatiDivergence("solve_dare: no convergence after " + std::to_string(it) +
                            " iterations at gamma=" + std::to_string(pb.gamma) +
                            " (last update " + std::to_string(diff) + ")");
}

inline Eigen::MatrixXd closed_loop_matrix(const LinearQuadraticProblem& pb,
                                          const Eigen::MatrixXd& K) {
    if (K.rows() != pb.m() || K.cols() != pb.n())
        throw std::invalid_argument("closed_loop_matrix: K must be m x n");
    return pb.A + pb.B * K;
}

// Largest eigenvalue magnitude, computed by the QR iteration behind
// Eigen's general eigenvalue solver.
inline double spectral_radius(const Eigen::MatrixXd& M) {
    if (M.rows() != M.cols()) throw std::invalid_argument("spectral_radius: matrix must be square");
    Eigen::EigenSolver<Eigen::MatrixXd> es(M, /*computeEigenvectors=*/false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

struct ThresholdResult {
    double gamma_critical = 0.0;
    double bracket_lo = 0.0;
    double bracket_hi = 0.0;
    std::string criterion;
    bool at_bracket_floor = false;  // criterion already holds at the lower bracket end
};

// Bisect the smallest gamma at which `holds` switches from false to true.
// The predicate is assumed monotone over the bracket; the endpoints are
// evaluated to guard against a non-straddling bracket.
inline ThresholdResult bisect_threshold(const std::function<bool(double)>& holds,
                                        const std::string& criterion, double lo = 0.01,
                                        double hi = 0.999, double tol = 5e-5, int max_iter = 60) {
    ThresholdResult res;
    res.criterion = criterion;
    if (holds(lo)) {
        res.gamma_critical = lo;
        res.bracket_lo = res.bracket_hi = lo;
        res.at_bracket_floor = true;
        return res;
    }
    if (!holds(hi))
        throw BracketingError("bisect_threshold(" + criterion + "): criterion fails at both ends [" +
                              std::to_string(lo) + ", " + std::to_string(hi) + "]");
    for (int it = 0; it < max_iter && (hi - lo) > tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (holds(mid))
            hi = mid;
        else
            lo = mid;
    }
    res.gamma_critical = 0.5 * (lo + hi);
    res.bracket_lo = lo;
    res.bracket_hi = hi;
    return res;
}

namespace detail {

// Strict margin below 1 avoids round-off flip-flop at the stability boundary.
constexpr double kSpectralRadiusMargin = 1e-9;

inline LinearQuadraticProblem at_gamma(const LinearQuadraticProblem& pb, double gamma) {
    return LinearQuadraticProblem(pb.A, pb.B, pb.Q, pb.R, gamma, pb.state_box, pb.input_box);
}

}  // namespace detail

// Smallest gamma whose optimal gain stabilizes the closed loop.
inline ThresholdResult stabilizing_threshold(const LinearQuadraticProblem& pb, double tol = 5e-5) {
    auto holds = [&](double g) {
        try {
            const auto p = detail::at_gamma(pb, g);
            const auto sol = solve_dare(p);
            return spectral_radius(closed_loop_matrix(p, sol.K)) < 1.0 - detail::kSpectralRadiusMargin;
        } catch (const RiccatiDivergence&) {
            return false;
        }
    };
    return bisect_threshold(holds, "stabilizing", 0.01, 0.999, tol);
}

// Smallest gamma at which the value matrix decreases along the closed loop,
// i.e. P - (A+BK)'P(A+BK) is positive definite.
inline ThresholdResult lyapunov_threshold(const LinearQuadraticProblem& pb, double tol = 5e-5) {
    auto holds = [&](double g) {
        try {
            const auto p = detail::at_gamma(pb, g);
            const auto sol = solve_dare(p);
            const Eigen::MatrixXd M = closed_loop_matrix(p, sol.K);
            return detail::min_eigenvalue(sol.P - M.transpose() * sol.P * M) > 0.0;
        } catch (const RiccatiDivergence&) {
            return false;
        }
    };
    return bisect_threshold(holds, "lyapunov", 0.01, 0.999, tol);
}

// Smallest gamma admitting a constant C in [1, 1/(1-gamma)) with
// V(x) <= C inf_u L(x,u). For a separable quadratic cost inf_u L = x'Qx,
// so feasibility reduces to lambda_max(Q^-1/2 P Q^-1/2) < 1/(1-gamma).
inline ThresholdResult gaitsgory_c_threshold(const LinearQuadraticProblem& pb, double tol = 5e-5) {
    if (detail::min_eigenvalue(pb.Q) <= 0.0)
        throw std::invalid_argument("gaitsgory_c_threshold: requires Q positive definite");
    auto holds = [&](double g) {
        try {
            const auto p = detail::at_gamma(pb, g);
            const auto sol = solve_dare(p);
            Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(sol.P, p.Q);
            return ges.eigenvalues().maxCoeff() < 1.0 / (1.0 - g);
        } catch (const RiccatiDivergence&) {
            return false;
        }
    };
    return bisect_threshold(holds, "gaitsgory_c", 0.01, 0.999, tol);
}

}  // namespace dempc
