#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "dempc/certificate.hpp"

using namespace dempc;

namespace {

LinearQuadraticProblem reference_problem(double gamma = 0.334) {
    Eigen::MatrixXd A(2, 2);
    A << 2, 0, 1, 2;
    const Eigen::MatrixXd I2 = Eigen::MatrixXd::Identity(2, 2);
    return LinearQuadraticProblem(A, I2, I2, I2, gamma);
}

QuadraticStorage reported_storage() {
    Eigen::MatrixXd L(2, 2);
    L << -3.9511, -1.2702, -1.2702, -2.7738;
    return QuadraticStorage(L);
}

Eigen::MatrixXd reported_condition_ii_matrix() {
    Eigen::MatrixXd H(4, 4);
    H << 4.3127, 1.9906, 2.8167, 1.6304,  //
        1.9906, 1.6905, 0.7643, 1.7322,   //
        2.8167, 0.7643, 2.2173, 0.3822,   //
        1.6304, 1.7322, 0.3822, 1.8661;
    return H;
}

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

TEST_CASE("zero storage collapses condition (i) to blockdiag(Q, R)") {
    const auto pb = reference_problem();
    const QuadraticStorage zero(Eigen::MatrixXd::Zero(2, 2));
    const Eigen::MatrixXd H = assemble_condition_i(pb, zero);
    Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(4, 4);
    expected.topLeftCorner(2, 2) = pb.Q;
    expected.bottomRightCorner(2, 2) = pb.R;
    CHECK((H - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("scalar condition-(i) assembly") {
    Eigen::MatrixXd A(1, 1), B(1, 1), I1 = Eigen::MatrixXd::Identity(1, 1);
    A << 1;
    B << 0;
    const LinearQuadraticProblem pb(A, B, I1, I1, 0.5);
    Eigen::MatrixXd L(1, 1);
    L << 2;
    const Eigen::MatrixXd H = assemble_condition_i(pb, QuadraticStorage(L));
    CHECK(H(0, 0) == Catch::Approx(2.0));  // 1 + 2 - 0.5*2
    CHECK(H(1, 1) == Catch::Approx(1.0));
    CHECK(H(0, 1) == 0.0);
}

TEST_CASE("degenerate problems collapse condition (ii) to blockdiag(Q, R)") {
    const Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(2, 2);
    const Eigen::MatrixXd I2 = Eigen::MatrixXd::Identity(2, 2);
    const LinearQuadraticProblem pb(Z, Z, I2, I2, 0.5);
    const RiccatiSolution sol = solve_dare(pb);
    const Eigen::MatrixXd H =
        assemble_condition_ii(pb, QuadraticStorage(Z), sol.P);
    Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(4, 4);
    expected.topLeftCorner(2, 2) = I2;
    expected.bottomRightCorner(2, 2) = I2;
    CHECK((H - expected).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("the two condition forms coincide in the undiscounted limit") {
    const auto pb = reference_problem(1.0);
    const RiccatiSolution sol = solve_dare(pb);
    const QuadraticStorage st = reported_storage();
    const Eigen::MatrixXd Hi = assemble_condition_i(pb, st);
    const Eigen::MatrixXd Hii = assemble_condition_ii(pb, st, sol.P);
    CHECK((Hi - Hii).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("quadratic-form fidelity on sampled points") {
    const auto pb = reference_problem();
    const QuadraticStorage st = reported_storage();
    const RiccatiSolution sol = solve_dare(pb, 1e-14);
    const Eigen::MatrixXd Hi = assemble_condition_i(pb, st);
    const Eigen::MatrixXd Hii = assemble_condition_ii(pb, st, sol.P);

    std::mt19937_64 rng(123);
    for (int trial = 0; trial < 1000; ++trial) {
        Eigen::Vector2d x(2.0 * uniform01(rng) - 1.0, 2.0 * uniform01(rng) - 1.0);
        Eigen::Vector2d u(2.0 * uniform01(rng) - 1.0, 2.0 * uniform01(rng) - 1.0);
        Eigen::Vector4d z;
        z << x, u;
        const Eigen::Vector2d f = pb.A * x + pb.B * u;
        const double lam_x = st(x);
        const double lam_f = st(f);
        const double L = pb.stage_cost(x, u);

        const double lhs_i = L + lam_x - pb.gamma * lam_f;
        const double quad_i = z.dot(Hi * z);
        CHECK(std::abs(quad_i - lhs_i) <= 1e-9 * (1.0 + std::abs(lhs_i)));

        const double lhs_ii =
            L + lam_x - lam_f + (pb.gamma - 1.0) * f.dot(sol.P * f);
        const double quad_ii = z.dot(Hii * z);
        CHECK(std::abs(quad_ii - lhs_ii) <= 1e-9 * (1.0 + std::abs(lhs_ii)));
    }
}

TEST_CASE("reported storage reproduces the reported matrices") {
    const auto pb = reference_problem();
    const QuadraticStorage st = reported_storage();
    const RiccatiSolution sol = solve_dare(pb);

    const Eigen::MatrixXd Hii = assemble_condition_ii(pb, st, sol.P);
    CHECK((Hii - reported_condition_ii_matrix()).cwiseAbs().maxCoeff() <= 2e-3);

    Eigen::MatrixXd Phat_expected(2, 2);
    Phat_expected << 0.1537, 0.0632, 0.0632, 0.0907;
    CHECK((sol.P + st.Lambda - Phat_expected).cwiseAbs().maxCoeff() <= 1e-3);

    const SdsdReport rep = verify_certificate(pb, st, 1e-6);
    CHECK(rep.margin_i == Catch::Approx(0.0253654).margin(1e-4));
    CHECK(rep.margin_ii == Catch::Approx(0.0022886).margin(1e-4));
    CHECK(rep.margin_phat >= 0.050);
    CHECK(rep.margin_phat == Catch::Approx(0.0516411).margin(1e-4));
    CHECK(rep.feasible);

    // state-only strictness margins sit above the full-matrix ones
    CHECK(rep.margin_i_xstrict == Catch::Approx(0.0358152).margin(1e-4));
    CHECK(rep.margin_ii_xstrict == Catch::Approx(0.0031709).margin(1e-4));
    CHECK(rep.margin_i_xstrict >= rep.margin_i);
    CHECK(rep.margin_ii_xstrict >= rep.margin_ii);

    // witnesses attain the margins
    const double quad_i = rep.witness_i.dot(assemble_condition_i(pb, st) * rep.witness_i);
    CHECK(quad_i == Catch::Approx(rep.margin_i).margin(1e-10));
}

TEST_CASE("identity storage with identity costs has unit margin") {
    const Eigen::MatrixXd I2 = Eigen::MatrixXd::Identity(2, 2);
    const LinearQuadraticProblem pb(Eigen::MatrixXd::Zero(2, 2), I2, I2, I2, 0.5);
    const SdsdReport rep = verify_certificate(pb, QuadraticStorage(Eigen::MatrixXd::Zero(2, 2)));
    CHECK(rep.margin_i == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("synthesis at the reported discount factors") {
    const auto pb = reference_problem();

    SECTION("comfortably feasible at 0.334") {
        const SynthesisResult r = synthesize_certificate(pb, 1e-9, 0);
        CHECK(r.feasible);
        CHECK(r.best_margin > 1e-4);
        const SdsdReport rep = verify_certificate(pb, r.storage, 1e-9);
        CHECK(rep.feasible);  // synthesis/verification consistency
    }
    SECTION("tightly feasible at the stability threshold") {
        const SynthesisResult r = synthesize_certificate(reference_problem(0.3109), 1e-9, 0);
        CHECK(r.feasible);
        const SdsdReport rep = verify_certificate(reference_problem(0.3109), r.storage, 0.0);
        CHECK(rep.margin_i > 0.0);
        CHECK(rep.margin_ii > 0.0);
        CHECK(rep.margin_i <= 1e-3);   // near-boundary: both margins tiny
        CHECK(rep.margin_ii <= 1e-3);
        CHECK(rep.margin_phat > 0.0);
    }
    SECTION("infeasible below the stability threshold") {
        const SynthesisResult r = synthesize_certificate(reference_problem(0.29), 1e-9, 0);
        CHECK_FALSE(r.feasible);
        CHECK(r.best_margin <= 1e-9);
    }
    SECTION("either condition alone stays feasible below the threshold") {
        const SynthesisResult ri = synthesize_certificate(reference_problem(0.29), 1e-9, 0,
                                                          SynthesisConditions::condition_i);
        CHECK(ri.feasible);
        CHECK(ri.best_margin > 0.5);  // zero storage already gives margin 1
        const SynthesisResult rii = synthesize_certificate(reference_problem(0.29), 1e-9, 0,
                                                           SynthesisConditions::condition_ii);
        CHECK(rii.feasible);
        CHECK(rii.best_margin > 1e-4);
    }
    SECTION("deterministic for a fixed seed") {
        const SynthesisResult a = synthesize_certificate(pb, 1e-9, 3);
        const SynthesisResult b = synthesize_certificate(pb, 1e-9, 3);
        CHECK(a.best_margin == b.best_margin);
        CHECK((a.storage.Lambda - b.storage.Lambda).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("zero-storage condition-(ii) threshold") {
    // The implementable criterion (minimum eigenvalue of the assembled
    // condition-(ii) form turning positive) places the crossing at 0.9794.
    // The originally reported crossing (~0.935) is not reproduced by this
    // criterion; see the acceptance suite for the tracked discrepancy.
    const auto pb = reference_problem();
    const ThresholdResult r = lambda_zero_threshold(pb);
    CHECK(std::abs(r.gamma_critical - 0.97940) <= 5e-4);

    // scan oracle at step 1e-4 around the crossing
    auto holds = [&](double g) {
        const LinearQuadraticProblem p(pb.A, pb.B, pb.Q, pb.R, g);
        const RiccatiSolution sol = solve_dare(p);
        return detail::min_eigenvalue(assemble_condition_ii(
                   p, QuadraticStorage(Eigen::MatrixXd::Zero(2, 2)), sol.P)) > 0.0;
    };
    double first = -1.0;
    for (double g = r.gamma_critical - 2e-3; g <= r.gamma_critical + 2e-3; g += 1e-4) {
        if (holds(g)) {
            first = g;
            break;
        }
    }
    REQUIRE(first > 0.0);
    CHECK(std::abs(first - r.gamma_critical) <= 2e-4);
}

TEST_CASE("zero-storage threshold floors for a memoryless system") {
    const Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(2, 2);
    const Eigen::MatrixXd I2 = Eigen::MatrixXd::Identity(2, 2);
    const LinearQuadraticProblem pb(Z, Z, I2, I2, 0.5);
    const ThresholdResult r = lambda_zero_threshold(pb);
    CHECK(r.at_bracket_floor);
}

TEST_CASE("storage validation") {
    Eigen::MatrixXd bad(2, 2);
    bad << 1, 2, 0, 1;
    CHECK_THROWS_AS(QuadraticStorage(bad), std::invalid_argument);
    CHECK_THROWS_AS(QuadraticStorage(Eigen::MatrixXd::Zero(2, 3)), std::invalid_argument);
}
