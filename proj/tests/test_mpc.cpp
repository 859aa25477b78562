#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "rhlq/mpc.hpp"
#include "rhlq/riccati.hpp"

using namespace rhlq;
using namespace rhlq::model;
using namespace rhlq::mpc;

namespace {

LqProblem example_one(double pf = 0.0) {
    return LqProblem(LinearSystem(Matrix({{2.0}}), Matrix({{1.0}})),
                     StageCost(SymMatrix({{0.0}}), Matrix({{0.0}}), SymMatrix({{1.0}})),
                     TerminalCost{SymMatrix({{pf}})});
}

// |x| <= 1 as C x + D u + e <= 0
AffineConstraintSet unit_box_state() {
    return AffineConstraintSet(Matrix({{1.0}, {-1.0}}), Matrix({{0.0}, {0.0}}),
                               Vector{-1.0, -1.0});
}

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo = -1.0,
                     double hi = 1.0) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = rng.uniform(lo, hi);
    return m;
}

Vector random_vector(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    Vector v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = rng.uniform(lo, hi);
    return v;
}

}  // namespace

TEST_CASE("condensing") {
    SECTION("horizon one with zero terminal cost leaves only the input weight") {
        const CondensedQp qp = condense(MpcProblem(example_one(0.0), 1));
        REQUIRE(qp.hessian.dim() == 1);
        CHECK(qp.hessian(0, 0) == 1.0);
        CHECK(qp.hessian_pd);
        const auto out = solve_qp(qp, Vector{1.0});
        CHECK(out.u_stack[0] == Catch::Approx(0.0).margin(1e-15));
        CHECK(out.active_set.empty());
    }
    SECTION("objective equals direct simulate-and-sum evaluation") {
        Rng rng(7013);
        for (int rep = 0; rep < 25; ++rep) {
            const std::size_t n_x = 1 + rng.below(3);
            const std::size_t n_u = 1 + rng.below(2);
            const auto inst = generate_predissipative_instance(rng.next_u64(), n_x, n_u);
            const std::size_t horizon = 1 + rng.below(4);
            const LqProblem prob(inst.problem.sys, inst.problem.cost,
                                 TerminalCost{la::symmetrize(random_matrix(rng, n_x, n_x))});
            const CondensedQp qp = condense(MpcProblem(prob, horizon));
            const Vector xhat = random_vector(rng, n_x);
            const Vector u = random_vector(rng, horizon * n_u);
            const double direct = oracles::direct_objective(prob, xhat, u, horizon);
            CHECK(qp.qp_value(u, xhat) ==
                  Catch::Approx(direct).margin(1e-12 * std::max(1.0, std::abs(direct))));
        }
    }
    SECTION("unconstrained minimizer matches the dynamic-programming feedback") {
        Rng rng(7014);
        for (int rep = 0; rep < 20; ++rep) {
            const std::size_t n_x = 1 + rng.below(3);
            const std::size_t n_u = 1 + rng.below(2);
            const auto inst = generate_predissipative_instance(rng.next_u64(), n_x, n_u);
            const std::size_t horizon = 1 + rng.below(6);
            // a positive definite terminal cost keeps every reduced Hessian PD
            const Matrix root = random_matrix(rng, n_x, n_x);
            const SymMatrix pf = SymMatrix(la::symmetrize(root.transpose() * root).matrix() +
                                           Matrix::identity(n_x) * 0.5);
            const LqProblem prob(inst.problem.sys, inst.problem.cost, TerminalCost{pf});
            const CondensedQp qp = condense(MpcProblem(prob, horizon));
            if (!qp.hessian_pd) continue;
            const Vector xhat = random_vector(rng, n_x);
            const auto out = solve_qp(qp, xhat);
            const auto traj = riccati::iterate(prob, horizon);
            const Vector u0_expected = -(traj.K_seq.back() * xhat);
            for (std::size_t i = 0; i < n_u; ++i)
                CHECK(out.u_stack[i] == Catch::Approx(u0_expected[i]).margin(1e-9));
        }
    }
}

TEST_CASE("qp solving on the constrained example") {
    SECTION("the first input must push the unstable state down") {
        const MpcProblem mpc(example_one(1e-4), 9, unit_box_state());
        const CondensedQp qp = condense(mpc);
        const auto out = solve_qp(qp, Vector{1.0});
        // brute-force grid: feasibility of stage 1 alone forces u0 into
        // [-3, -1]; every feasible grid point is strictly negative
        for (double u0 = -4.0; u0 <= 1.0; u0 += 0.05) {
            const double x1 = 2.0 + u0;
            if (std::abs(x1) <= 1.0) CHECK(u0 < 0.0);
        }
        CHECK(out.u_stack[0] < 0.0);
        CHECK(out.u_stack[0] >= -3.0 - 1e-9);
        CHECK(out.u_stack[0] <= -1.0 + 1e-9);
    }
    SECTION("an initial state outside the box is infeasible") {
        const MpcProblem mpc(example_one(1e-4), 5, unit_box_state());
        const CondensedQp qp = condense(mpc);
        CHECK_THROWS_AS(solve_qp(qp, Vector{2.0}), QpInfeasible);
    }
}

TEST_CASE("active-set solutions match exhaustive enumeration") {
    Rng rng(7100);
    int compared = 0;
    for (int rep = 0; rep < 60; ++rep) {
        const auto inst = generate_predissipative_instance(rng.next_u64(), 1, 1);
        const std::size_t horizon = 1 + rng.below(3);
        const Matrix root = random_matrix(rng, 1, 1);
        const SymMatrix pf = SymMatrix({{root(0, 0) * root(0, 0) + 0.3}});
        const LqProblem prob(inst.problem.sys, inst.problem.cost, TerminalCost{pf});
        const std::size_t l = 1 + rng.below(2);  // up to 2 rows/stage, <= 6 total
        const AffineConstraintSet cons(random_matrix(rng, l, 1), random_matrix(rng, l, 1),
                                       random_vector(rng, l, -1.2, -0.2));
        const CondensedQp qp = condense(MpcProblem(prob, horizon, cons));
        if (!qp.hessian_pd) continue;
        const Vector xhat = random_vector(rng, 1);
        Vector h = -(qp.con_xmap * xhat);
        for (std::size_t i = 0; i < h.size(); ++i) h[i] -= qp.con_offset[i];
        const Vector g = qp.gradient_map * xhat;
        const auto oracle = oracles::qp_enumeration(qp.hessian, g, qp.con_rows, h);
        try {
            const auto out = solve_qp(qp, xhat);
            REQUIRE(oracle.feasible);
            const Vector cx = qp.constant_map.matrix() * xhat;
            const double oracle_full = oracle.value + dot(xhat, cx);
            CHECK(out.value ==
                  Catch::Approx(oracle_full).margin(1e-8 * std::max(1.0, std::abs(oracle_full))));
            ++compared;
        } catch (const QpInfeasible&) {
            CHECK_FALSE(oracle.feasible);
        }
    }
    CHECK(compared >= 30);
}

TEST_CASE("kkt conditions at the reported solution") {
    Rng rng(7200);
    for (int rep = 0; rep < 20; ++rep) {
        const auto inst = generate_predissipative_instance(rng.next_u64(), 1, 1);
        const std::size_t horizon = 2 + rng.below(2);
        const LqProblem prob(inst.problem.sys, inst.problem.cost,
                             TerminalCost{SymMatrix({{1.0}})});
        const AffineConstraintSet cons(Matrix({{1.0}, {-1.0}}), Matrix({{0.2}, {-0.1}}),
                                       Vector{-1.0, -1.0});
        const CondensedQp qp = condense(MpcProblem(prob, horizon, cons));
        if (!qp.hessian_pd) continue;
        const Vector xhat = random_vector(rng, 1, -0.9, 0.9);
        Vector h = -(qp.con_xmap * xhat);
        for (std::size_t i = 0; i < h.size(); ++i) h[i] -= qp.con_offset[i];
        const Vector g = qp.gradient_map * xhat;
        qp::QpSolution sol;
        try {
            sol = qp::solve(qp.hessian, g, qp.con_rows, h);
        } catch (const QpInfeasible&) {
            continue;
        }
        const double scale = std::max(1.0, sol.u.max_abs());
        // primal feasibility
        const Vector gu = qp.con_rows * sol.u;
        for (std::size_t i = 0; i < gu.size(); ++i) CHECK(gu[i] <= h[i] + 1e-9 * scale);
        // stationarity: 2(Hu + g) + G_W' mu = 0
        Vector grad = qp.hessian.matrix() * sol.u;
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = 2.0 * (grad[i] + g[i]);
        for (std::size_t r = 0; r < sol.active.size(); ++r)
            for (std::size_t i = 0; i < grad.size(); ++i)
                grad[i] += qp.con_rows(sol.active[r], i) * sol.multipliers[r];
        CHECK(grad.max_abs() <= 1e-9 * std::max(1.0, scale));
        // dual feasibility and complementarity
        for (std::size_t r = 0; r < sol.active.size(); ++r) {
            CHECK(sol.multipliers[r] >= -1e-9);
            CHECK(std::abs(gu[sol.active[r]] - h[sol.active[r]]) <= 1e-9 * scale);
        }
    }
}

TEST_CASE("closed-loop simulation") {
    SECTION("without constraints the loop is exactly the linear feedback") {
        Rng rng(7300);
        for (int rep = 0; rep < 10; ++rep) {
            const std::size_t n_x = 1 + rng.below(3);
            const auto inst = generate_predissipative_instance(rng.next_u64(), n_x, 1);
            const auto stab = riccati::solve_dare_stabilizing(inst.problem, inst.storage);
            const LqProblem prob(inst.problem.sys, inst.problem.cost, TerminalCost{stab.P});
            const MpcProblem mpc(prob, 5);
            const Vector x0 = random_vector(rng, n_x);
            const auto trace = simulate(mpc, x0, 30);
            REQUIRE(trace.status == TraceStatus::Completed);
            REQUIRE(trace.states.size() == 31);
            const auto traj = riccati::iterate(prob, 5);
            const Matrix closed = prob.sys.A - prob.sys.B * traj.K_seq.back();
            Vector x = x0;
            for (std::size_t j = 0; j < 30; ++j) {
                x = closed * x;
                CHECK((trace.states[j + 1] - x).norm() <= 1e-9 * std::max(1.0, x.norm()));
            }
        }
    }
    SECTION("with the stationary terminal cost the decay rate is the closed-loop radius") {
        const auto stab =
            riccati::solve_dare_stabilizing(example_one(), StorageMatrix{SymMatrix({{-1.0}})});
        const LqProblem prob = example_one(stab.P(0, 0));
        const auto trace = simulate(MpcProblem(prob, 4), Vector{1.0}, 40);
        REQUIRE(trace.status == TraceStatus::Completed);
        const double rho = stab.closed_loop_spectrum.spectral_radius;
        for (std::size_t j = 0; j + 1 < trace.states.size(); ++j) {
            const double ratio = std::abs(trace.states[j + 1][0]) / std::abs(trace.states[j][0]);
            CHECK(ratio == Catch::Approx(rho).margin(1e-6));
        }
    }
    SECTION("every trace point satisfies the imposed constraints") {
        const MpcProblem mpc(example_one(1e-4), 9, unit_box_state());
        const auto trace = simulate(mpc, Vector{1.0}, 60);
        REQUIRE(trace.status == TraceStatus::Completed);
        for (std::size_t j = 0; j < trace.inputs.size(); ++j) {
            CHECK(trace.states[j][0] <= 1.0 + 1e-8);
            CHECK(-trace.states[j][0] <= 1.0 + 1e-8);
        }
        CHECK(std::abs(trace.states.back()[0]) < 1e-3);  // well on its way to the origin
    }
    SECTION("zero terminal cost with the box keeps the state pinned") {
        const MpcProblem mpc(example_one(0.0), 9, unit_box_state());
        const auto trace = simulate(mpc, Vector{1.0}, 60);
        REQUIRE(trace.status == TraceStatus::Completed);
        CHECK(std::abs(trace.states.back()[0]) >= 1e-2);
    }
    SECTION("the unconstrained zero-terminal-cost run diverges and is recorded") {
        const MpcProblem mpc(example_one(0.0), 9);
        const auto trace = simulate(mpc, Vector{1.0}, 100);
        CHECK(trace.status == TraceStatus::Diverged);
        CHECK(trace.states.size() < 101);
    }
    SECTION("state transitions are exact") {
        const MpcProblem mpc(example_one(1e-4), 6, unit_box_state());
        const auto trace = simulate(mpc, Vector{1.0}, 20);
        REQUIRE(trace.status == TraceStatus::Completed);
        for (std::size_t j = 0; j < trace.inputs.size(); ++j) {
            const double next = 2.0 * trace.states[j][0] + trace.inputs[j][0];
            CHECK(std::abs(trace.states[j + 1][0] - next) <= 1e-12);
        }
    }
}
