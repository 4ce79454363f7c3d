#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dempc/dp.hpp"

using namespace dempc;

namespace {

ScalarGridProblem reference_grid_problem(int nx = 401, int nu = 401, double gamma = 0.9) {
    return ScalarGridProblem(DynamicsFamily{0.01, 0.96}, CostFamily{-1.5, 2.0, 0.1, 4.0},
                             Interval{0.0, 1.0}, Interval{0.0, 20.0}, nx, nu, gamma);
}

double tight_tolerance(const ScalarGridProblem& pb) {
    const DpTables t = make_dp_tables(pb);
    double linf = 0.0;
    for (double c : t.cost) linf = std::max(linf, std::abs(c));
    return 1e-12 * std::max(1.0, linf);
}

}  // namespace

TEST_CASE("constant stage cost gives the geometric-series value") {
    const double gamma = 0.8;
    const ScalarGridProblem pb(parse_expression("0.5*x"), parse_expression("3"),
                               Interval{0.0, 1.0}, Interval{0.0, 1.0}, 21, 5, gamma);
    const ValueIterationResult vi = value_iteration(pb);
    for (double v : vi.value.values)
        CHECK(v == Catch::Approx(3.0 / (1.0 - gamma)).margin(vi.value.residual / (1.0 - gamma) * 2));
    // every input ties; the tie break picks the smallest input node
    for (int idx : vi.policy.indices) CHECK(idx == 0);
}

TEST_CASE("zero stage cost gives the zero value function") {
    const ScalarGridProblem pb(parse_expression("0.5*x"), parse_expression("0"),
                               Interval{0.0, 1.0}, Interval{0.0, 1.0}, 21, 5, 0.8);
    const ValueIterationResult vi = value_iteration(pb);
    for (double v : vi.value.values) CHECK(v == 0.0);
}

TEST_CASE("reference problem against a finer-grid oracle") {
    const ValueIterationResult coarse = value_iteration(reference_grid_problem());
    CHECK(coarse.value.residual <= default_vi_tolerance(make_dp_tables(reference_grid_problem())));

    const ValueIterationResult fine = value_iteration(reference_grid_problem(1601, 1601));
    for (double x : {0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0}) {
        const double vc = evaluate_value(coarse.value, x);
        const double vf = evaluate_value(fine.value, x);
        CHECK(std::abs(vc - vf) <= 5e-3 * (1.0 + std::abs(vf)));
    }
    // spot anchors for the reference table
    CHECK(evaluate_value(coarse.value, 0.0) == Catch::Approx(-53.6106).margin(5e-3));
    CHECK(evaluate_value(coarse.value, 0.5) == Catch::Approx(-21.5313).margin(5e-3));
    CHECK(evaluate_value(coarse.value, 1.0) == Catch::Approx(1.33686).margin(5e-3));
}

TEST_CASE("interpolation rules") {
    GridValueFunction v;
    v.grid = UniformGrid{0.0, 1.0, 5};
    v.values = {1.0, 2.0, 0.5, 3.0, -1.0};
    v.gamma = 0.9;

    SECTION("exact at nodes") {
        for (int i = 0; i < 5; ++i)
            CHECK(evaluate_value(v, v.grid.node(i)) == v.values[static_cast<std::size_t>(i)]);
    }
    SECTION("midpoints average the neighbors") {
        CHECK(evaluate_value(v, 0.125) == Catch::Approx(1.5));
        CHECK(evaluate_value(v, 0.375) == Catch::Approx(1.25));
    }
    SECTION("linear tables interpolate exactly everywhere") {
        GridValueFunction lin;
        lin.grid = UniformGrid{0.0, 1.0, 11};
        for (int i = 0; i <= 10; ++i) lin.values.push_back(2.0 * lin.grid.node(i) - 0.3);
        for (double x : {0.03, 0.217, 0.5, 0.999})
            CHECK(evaluate_value(lin, x) == Catch::Approx(2.0 * x - 0.3).margin(1e-14));
    }
    SECTION("out-of-range points are rejected") {
        CHECK_THROWS_AS(evaluate_value(v, -0.01), std::out_of_range);
        CHECK_THROWS_AS(evaluate_value(v, 1.01), std::out_of_range);
    }
}

TEST_CASE("numeric gradient") {
    GridValueFunction v;
    v.grid = UniformGrid{0.0, 1.0, 401};
    for (int i = 0; i < 401; ++i) {
        const double x = v.grid.node(i);
        v.values.push_back(x * x);
    }

    SECTION("exact for quadratics at cell-aligned offsets") {
        CHECK(numeric_gradient(v, 0.5, 0.01) == Catch::Approx(1.0).margin(1e-6));
    }
    SECTION("zero for constants") {
        GridValueFunction c;
        c.grid = UniformGrid{0.0, 1.0, 11};
        c.values.assign(11, 7.0);
        CHECK(numeric_gradient(c, 0.4, 0.3) == 0.0);
    }
    SECTION("h below two grid steps is rejected") {
        CHECK_THROWS_AS(numeric_gradient(v, 0.5, 0.5 * v.grid.step()), std::invalid_argument);
    }
    SECTION("stencil outside the range is rejected") {
        CHECK_THROWS_AS(numeric_gradient(v, 0.999, 0.01), std::out_of_range);
    }
}

TEST_CASE("gradient at the steady state agrees with Richardson extrapolation") {
    const auto pb = reference_grid_problem();
    const ValueIterationResult vi = value_iteration(pb);
    const double xs = 0.5504;  // near the optimal steady state
    const double h = 4.0 * vi.value.grid.step();
    const double g1 = numeric_gradient(vi.value, xs, h);
    const double g2 = numeric_gradient(vi.value, xs, 2.0 * h);
    const double g4 = numeric_gradient(vi.value, xs, 4.0 * h);
    const double richardson = (4.0 * g1 - g2) / 3.0;
    CHECK(std::abs(g1 - richardson) <= 5e-3 * (1.0 + std::abs(g1)));
    CHECK(std::abs(g2 - g4) <= 1e-1 * (1.0 + std::abs(g2)));  // coarse stencils stay consistent
}

TEST_CASE("greedy policy") {
    SECTION("with a zero value table the policy minimizes the stage cost alone") {
        const ScalarGridProblem pb(parse_expression("0.5*x"), parse_expression("(u-7.03)^2"),
                                   Interval{0.0, 1.0}, Interval{0.0, 20.0}, 11, 401, 0.9);
        GridValueFunction zero;
        zero.grid = state_grid(pb);
        zero.values.assign(11, 0.0);
        zero.gamma = 0.9;
        const GridPolicy pol = greedy_policy(pb, zero);
        for (double u : pol.inputs) CHECK(u == Catch::Approx(7.05));  // nearest input node
    }
    SECTION("matches the policy returned by value iteration") {
        const auto pb = reference_grid_problem(101, 101);
        const ValueIterationResult vi = value_iteration(pb);
        const GridPolicy pol = greedy_policy(pb, vi.value);
        CHECK(pol.indices == vi.policy.indices);
    }
    SECTION("grid mismatch is rejected") {
        const auto pb = reference_grid_problem(101, 101);
        GridValueFunction wrong;
        wrong.grid = UniformGrid{0.0, 1.0, 11};
        wrong.values.assign(11, 0.0);
        CHECK_THROWS_AS(greedy_policy(pb, wrong), std::invalid_argument);
    }
}

TEST_CASE("contraction of the Bellman iteration") {
    const ValueIterationResult vi = value_iteration(reference_grid_problem());
    const auto& r = vi.residual_history;
    REQUIRE(r.size() > 6);
    for (std::size_t k = 5; k + 1 < r.size(); ++k) {
        INFO("iteration " << k);
        CHECK(r[k + 1] <= (0.9 + 0.01) * r[k]);
    }
}

TEST_CASE("one Bellman sweep preserves nodewise ordering") {
    const auto pb = reference_grid_problem(51, 51);
    const DpTables t = make_dp_tables(pb);
    std::vector<double> v2(51);
    for (int i = 0; i < 51; ++i) v2[static_cast<std::size_t>(i)] = std::sin(0.3 * i);
    std::vector<double> v1 = v2;
    for (auto& x : v1) x -= 0.25;  // v1 <= v2 nodewise

    std::vector<double> t1(51), t2(51);
    bellman_sweep(t, v1, t1);
    bellman_sweep(t, v2, t2);
    for (int i = 0; i < 51; ++i) CHECK(t1[static_cast<std::size_t>(i)] <= t2[static_cast<std::size_t>(i)] + 1e-15);
}

TEST_CASE("constant cost shifts move the value table and keep the policy") {
    const auto base = reference_grid_problem(201, 201);
    const double c = 2.0;
    const auto shifted = base.with_cost(
        parse_expression("-1.5*u+2*u*x+0.1*(u-4)^2-2"));

    const double tol = tight_tolerance(base);
    const ValueIterationResult vb = value_iteration(base, tol);
    const ValueIterationResult vs = value_iteration(shifted, tol);

    const double expected_shift = c / (1.0 - 0.9);
    double worst = 0.0;
    for (std::size_t i = 0; i < vb.value.values.size(); ++i)
        worst = std::max(worst,
                         std::abs(vs.value.values[i] - (vb.value.values[i] - expected_shift)));
    CHECK(worst <= 1e-9 * expected_shift);
    CHECK(vs.policy.indices == vb.policy.indices);
}

TEST_CASE("value iteration is deterministic") {
    const auto pb = reference_grid_problem(101, 101);
    const ValueIterationResult a = value_iteration(pb);
    const ValueIterationResult b = value_iteration(pb);
    CHECK(a.value.values == b.value.values);
    CHECK(a.policy.indices == b.policy.indices);
    CHECK(a.value.iterations == b.value.iterations);
}

TEST_CASE("iteration budget violations raise a divergence error") {
    const auto pb = reference_grid_problem(51, 51);
    CHECK_THROWS_AS(value_iteration(pb, 1e-13, 3), ValueIterationDivergence);
    try {
        value_iteration(pb, 1e-13, 3);
    } catch (const ValueIterationDivergence& e) {
        CHECK(std::string(e.what()).find("residual") != std::string::npos);
    }
}

TEST_CASE("strict discounting is required") {
    CHECK_THROWS_AS(value_iteration(reference_grid_problem(21, 21, 1.0)), std::invalid_argument);
}
