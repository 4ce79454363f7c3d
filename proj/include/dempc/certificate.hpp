#pragma once

// Quadratic dissipativity certificates for linear-quadratic problems.
//
// With storage lambda(x) = x'Lx the two dissipativity conditions become
// positive semidefiniteness of (n+m) x (n+m) quadratic forms:
//
//   condition (i):  L(x,u) + lambda(x) - g lambda(f(x,u))
//       H_i  = [ Q + L - g A'LA   -g A'LB ]
//              [ -g B'LA           R - g B'LB ]
//
//   condition (ii): L(x,u) + lambda(x) - lambda(f) + (g-1) V(f),  V(x) = x'Px
//       H_ii = [ Q + L - A'TA     -A'TB ]   with  T = L + (1-g) P
//              [ -B'TA             R - B'TB ]
//
// Certificates are synthesized by maximizing the smaller minimum eigenvalue
// over the free entries of the symmetric storage matrix with a multi-start
// simplex search.

#include <cstdint>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

#include "dempc/lqr.hpp"
#include "dempc/nelder_mead.hpp"
#include "dempc/problem.hpp"

namespace dempc {

struct QuadraticStorage {
    Eigen::MatrixXd Lambda;  // symmetric; lambda(x) = x'Lambda x, so lambda(0) = 0

    explicit QuadraticStorage(Eigen::MatrixXd L) : Lambda(std::move(L)) {
        if (Lambda.rows() != Lambda.cols())
            throw std::invalid_argument("QuadraticStorage: Lambda must be square");
        if (!detail::is_symmetric(Lambda, 1e-12))
            throw std::invalid_argument("QuadraticStorage: Lambda must be symmetric");
    }

    double operator()(const Eigen::VectorXd& x) const { return x.dot(Lambda * x); }
};

inline Eigen::MatrixXd assemble_condition_i(const LinearQuadraticProblem& pb,
                                            const QuadraticStorage& storage) {
    const auto n = pb.n();
    const auto m = pb.m();
    if (storage.Lambda.rows() != n)
        throw std::invalid_argument("assemble_condition_i: Lambda must be n x n");
    const double g = pb.gamma;
    const Eigen::MatrixXd& L = storage.Lambda;
    Eigen::MatrixXd H(n + m, n + m);
    H.topLeftCorner(n, n) = pb.Q + L - g * pb.A.transpose() * L * pb.A;
    H.topRightCorner(n, m) = -g * pb.A.transpose() * L * pb.B;
    H.bottomLeftCorner(m, n) = H.topRightCorner(n, m).transpose();
    H.bottomRightCorner(m, m) = pb.R - g * pb.B.transpose() * L * pb.B;
    return H;
}

inline Eigen::MatrixXd assemble_condition_ii(const LinearQuadraticProblem& pb,
                                             const QuadraticStorage& storage,
                                             const Eigen::MatrixXd& P) {
    const auto n = pb.n();
    const auto m = pb.m();
    if (storage.Lambda.rows() != n)
        throw std::invalid_argument("assemble_condition_ii: Lambda must be n x n");
    if (P.rows() != n || P.cols() != n)
        throw std::invalid_argument("assemble_condition_ii: P must be n x n");
    const Eigen::MatrixXd& L = storage.Lambda;
    const Eigen::MatrixXd T = L + (1.0 - pb.gamma) * P;
    Eigen::MatrixXd H(n + m, n + m);
    H.topLeftCorner(n, n) = pb.Q + L - pb.A.transpose() * T * pb.A;
    H.topRightCorner(n, m) = -pb.A.transpose() * T * pb.B;
    H.bottomLeftCorner(m, n) = H.topRightCorner(n, m).transpose();
    H.bottomRightCorner(m, m) = pb.R - pb.B.transpose() * T * pb.B;
    return H;
}

// Largest eps with H - eps * blockdiag(I_n, 0) positive semidefinite: the
// strictness margin when the comparison function only involves the state.
// Requires a positive definite input block; the margin is the minimum
// eigenvalue of the Schur complement onto the state block.
inline double x_strict_margin(const Eigen::MatrixXd& H, Eigen::Index n) {
    const Eigen::Index m = H.rows() - n;
    const Eigen::MatrixXd Huu = H.bottomRightCorner(m, m);
    if (detail::min_eigenvalue(Huu) <= 0.0) return -std::numeric_limits<double>::infinity();
    const Eigen::MatrixXd Hxu = H.topRightCorner(n, m);
    const Eigen::MatrixXd schur =
        H.topLeftCorner(n, n) - Hxu * Huu.ldlt().solve(Hxu.transpose());
    return detail::min_eigenvalue(schur);
}

struct SdsdReport {
    double margin_i = 0.0;      // min eigenvalue of the condition-(i) form
    double margin_ii = 0.0;     // min eigenvalue of the condition-(ii) form
    double margin_phat = 0.0;   // min eigenvalue of P + Lambda
    double margin_i_xstrict = 0.0;   // Schur-complement margins (state-only strictness)
    double margin_ii_xstrict = 0.0;
    double epsilon = 0.0;
    bool feasible = false;      // min(margin_i, margin_ii) > epsilon and margin_phat > 0
    Eigen::VectorXd witness_i;  // eigenvector attaining margin_i
    Eigen::VectorXd witness_ii;
};

inline SdsdReport verify_certificate(const LinearQuadraticProblem& pb,
                                     const QuadraticStorage& storage, double epsilon = 1e-6) {
    if (epsilon < 0.0) throw std::invalid_argument("verify_certificate: epsilon must be >= 0");
    const RiccatiSolution sol = solve_dare(pb);
    SdsdReport rep;
    rep.epsilon = epsilon;
    const Eigen::MatrixXd Hi = assemble_condition_i(pb, storage);
    const Eigen::MatrixXd Hii = assemble_condition_ii(pb, storage, sol.P);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_i(Hi);
    rep.margin_i = es_i.eigenvalues()(0);
    rep.witness_i = es_i.eigenvectors().col(0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_ii(Hii);
    rep.margin_ii = es_ii.eigenvalues()(0);
    rep.witness_ii = es_ii.eigenvectors().col(0);
    rep.margin_i_xstrict = x_strict_margin(Hi, pb.n());
    rep.margin_ii_xstrict = x_strict_margin(Hii, pb.n());
    rep.margin_phat = detail::min_eigenvalue(sol.P + storage.Lambda);
    rep.feasible = std::min(rep.margin_i, rep.margin_ii) > epsilon && rep.margin_phat > 0.0;
    return rep;
}

enum class SynthesisConditions { condition_i, condition_ii, both };

struct SynthesisResult {
    bool feasible = false;
    QuadraticStorage storage{Eigen::MatrixXd::Zero(1, 1)};
    double best_margin = 0.0;  // achieved min eigenvalue over the selected conditions
};

namespace detail {

inline Eigen::MatrixXd storage_from_vech(const Eigen::VectorXd& v, Eigen::Index n) {
    Eigen::MatrixXd L(n, n);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j) {
            L(i, j) = v(k);
            L(j, i) = v(k);
            ++k;
        }
    return L;
}

// Uniform double in [0,1) from a raw 64-bit draw; keeps the stream
// independent of the standard library's distribution implementations.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace detail

// Maximizes the joint minimum-eigenvalue margin over the free entries of
// Lambda. Deterministic for a fixed seed: 16 simplex starts whose scales
// are drawn from the seeded generator, each polished by two restarts.
inline SynthesisResult synthesize_certificate(const LinearQuadraticProblem& pb,
                                              double epsilon = 1e-9, std::uint64_t seed = 0,
                                              SynthesisConditions conditions = SynthesisConditions::both,
                                              int n_starts = 16) {
    require_strict_discount(pb.gamma, "synthesize_certificate");
    const RiccatiSolution sol = solve_dare(pb);
    const Eigen::Index n = pb.n();
    const Eigen::Index dim = n * (n + 1) / 2;

    auto margin = [&](const Eigen::VectorXd& v) {
        const QuadraticStorage st(detail::storage_from_vech(v, n));
        double m = std::numeric_limits<double>::infinity();
        if (conditions != SynthesisConditions::condition_ii)
            m = std::min(m, detail::min_eigenvalue(assemble_condition_i(pb, st)));
        if (conditions != SynthesisConditions::condition_i)
            m = std::min(m, detail::min_eigenvalue(assemble_condition_ii(pb, st, sol.P)));
        return m;
    };
    auto objective = [&](const Eigen::VectorXd& v) { return -margin(v); };

    std::mt19937_64 rng(seed);
    double best_margin = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_v = Eigen::VectorXd::Zero(dim);

    for (int s = 0; s < n_starts; ++s) {
        Eigen::VectorXd v0 = Eigen::VectorXd::Zero(dim);
        double scale = 1.0;
        if (s > 0) {
            scale = std::pow(10.0, -2.0 + 3.0 * detail::uniform01(rng));
            for (Eigen::Index k = 0; k < dim; ++k)
                v0(k) = scale * (2.0 * detail::uniform01(rng) - 1.0);
        }
        NelderMeadOptions opts;
        opts.initial_step = scale;
        opts.max_evals = 4000;
        NelderMeadResult r = nelder_mead_minimize(objective, v0, opts);
        // polish: restart the simplex around the found point
        for (int polish = 0; polish < 2; ++polish) {
            NelderMeadOptions popts;
            popts.initial_step = std::max(1e-6, 1e-3 * scale);
            popts.max_evals = 4000;
            NelderMeadResult rp = nelder_mead_minimize(objective, r.x, popts);
            if (rp.value < r.value) r = rp;
        }
        if (-r.value > best_margin) {
            best_margin = -r.value;
            best_v = r.x;
        }
    }

    SynthesisResult res;
    res.best_margin = best_margin;
    res.storage = QuadraticStorage(detail::storage_from_vech(best_v, n));
    res.feasible = best_margin > epsilon;
    return res;
}

// Smallest gamma at which the condition-(ii) form with zero storage is
// positive definite.
inline ThresholdResult lambda_zero_threshold(const LinearQuadraticProblem& pb, double tol = 5e-5) {
    auto holds = [&](double g) {
        try {
            const auto p = detail::at_gamma(pb, g);
            const auto sol = solve_dare(p);
            const QuadraticStorage zero(Eigen::MatrixXd::Zero(p.n(), p.n()));
            return detail::min_eigenvalue(assemble_condition_ii(p, zero, sol.P)) > 0.0;
        } catch (const RiccatiDivergence&) {
            return false;
        }
    };
    return bisect_threshold(holds, "lambda_zero", 0.01, 0.999, tol);
}

}  // namespace dempc
