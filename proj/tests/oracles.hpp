#pragma once

// Independent oracles used by the test suites. Each computes expected values
// along a route separate from the library path it checks: plain scalar
// arithmetic for the recursion, series summation for Lyapunov limits,
// exhaustive active-set enumeration for QPs, and direct simulate-and-sum
// evaluation for condensed objectives.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "rhlq/matrix.hpp"
#include "rhlq/model.hpp"

namespace oracles {

using rhlq::la::Matrix;
using rhlq::la::SymMatrix;
using rhlq::la::Vector;

// --- scalar recursion for the A=2, B=1, Q=0, S=0, R=1 example --------------
// P+ = 4P/(1+P), K = 2P/(1+P); displayed closed form of that instance.

inline double example1_step(double p) { return 4.0 * p / (1.0 + p); }
inline double example1_feedback(double p) { return 2.0 * p / (1.0 + p); }

inline std::vector<double> example1_sequence(double p0, std::size_t n) {
    std::vector<double> seq{p0};
    for (std::size_t k = 0; k < n; ++k) seq.push_back(example1_step(seq.back()));
    return seq;
}

/// |A - B K_N| for the scalar example: 2/(1 + P_{N-1}).
inline double example1_closed_loop(double p0, std::size_t horizon) {
    const auto seq = example1_sequence(p0, horizon);
    return 2.0 / (1.0 + seq[horizon - 1]);
}

// --- general scalar (n_x = n_u = 1) recursion -------------------------------

struct ScalarLq {
    double a, b, q, s, r;
};

inline double scalar_step(const ScalarLq& d, double p) {
    const double k = (d.s + d.a * d.b * p) / (d.r + d.b * d.b * p);
    return d.q + d.a * d.a * p - (d.s + d.a * d.b * p) * k;
}

inline double scalar_feedback(const ScalarLq& d, double p) {
    return (d.s + d.a * d.b * p) / (d.r + d.b * d.b * p);
}

// --- discrete Lyapunov limit ------------------------------------------------

/// Series sum of (A')^k Q A^k; valid for Schur stable A.
inline SymMatrix lyapunov_series(const Matrix& a, const SymMatrix& q) {
    Matrix acc = q.matrix();
    Matrix power = Matrix::identity(a.rows());
    for (int k = 0; k < 200000; ++k) {
        power = power * a;
        const Matrix term = power.transpose() * q.matrix() * power;
        acc = acc + term;
        if (term.frobenius_norm() <= 1e-16 * std::max(1.0, acc.frobenius_norm())) break;
    }
    return rhlq::la::symmetrize(acc);
}

// --- direct evaluation of the finite-horizon objective ----------------------

/// Simulates the dynamics under the stacked input and sums stage costs plus
/// the terminal cost; no condensing involved.
inline double direct_objective(const rhlq::model::LqProblem& prob, const Vector& xhat,
                               const Vector& u_stack, std::size_t horizon) {
    const std::size_t n_u = prob.n_u();
    Vector x = xhat;
    double total = 0.0;
    for (std::size_t k = 0; k < horizon; ++k) {
        Vector u(n_u);
        for (std::size_t i = 0; i < n_u; ++i) u[i] = u_stack[k * n_u + i];
        const Vector qx = prob.cost.Q.matrix() * x;
        const Vector sx = prob.cost.S * x;
        const Vector ru = prob.cost.R.matrix() * u;
        total += dot(x, qx) + 2.0 * dot(u, sx) + dot(u, ru);
        x = prob.sys.A * x + prob.sys.B * u;
    }
    const Vector px = prob.terminal.Pf.matrix() * x;
    return total + dot(x, px);
}

// --- exhaustive active-set enumeration for small strictly convex QPs --------

struct QpOracleResult {
    bool feasible = false;
    double value = std::numeric_limits<double>::infinity();
    Vector minimizer;
};

/// minimize u'Hu + 2g'u subject to G u <= h by trying every subset of rows
/// as the active set and keeping the best KKT-consistent candidate.
inline QpOracleResult qp_enumeration(const SymMatrix& hess, const Vector& g, const Matrix& gmat,
                                     const Vector& h, double tol = 1e-8) {
    const std::size_t nv = hess.dim();
    const std::size_t rows = gmat.rows();
    QpOracleResult best;
    const double scale = std::max(1.0, h.max_abs());
    for (std::size_t mask = 0; mask < (std::size_t{1} << rows); ++mask) {
        std::vector<std::size_t> active;
        for (std::size_t i = 0; i < rows; ++i)
            if (mask & (std::size_t{1} << i)) active.push_back(i);
        if (active.size() > nv) continue;
        const std::size_t na = active.size();
        Matrix kkt(nv + na, nv + na);
        kkt.set_block(0, 0, hess.matrix() * 2.0);
        for (std::size_t r = 0; r < na; ++r)
            for (std::size_t c = 0; c < nv; ++c) {
                kkt(nv + r, c) = gmat(active[r], c);
                kkt(c, nv + r) = gmat(active[r], c);
            }
        Vector rhs(nv + na);
        for (std::size_t i = 0; i < nv; ++i) rhs[i] = -2.0 * g[i];
        for (std::size_t r = 0; r < na; ++r) rhs[nv + r] = h[active[r]];
        Vector sol;
        try {
            sol = rhlq::la::solve(kkt, rhs);
        } catch (const rhlq::SingularMatrix&) {
            continue;
        }
        Vector u(nv);
        for (std::size_t i = 0; i < nv; ++i) u[i] = sol[i];
        bool ok = true;
        for (std::size_t r = 0; r < na && ok; ++r)
            if (sol[nv + r] < -tol) ok = false;  // dual feasibility
        const Vector gu = gmat * u;
        for (std::size_t i = 0; i < rows && ok; ++i)
            if (gu[i] > h[i] + tol * scale) ok = false;  // primal feasibility
        if (!ok) continue;
        const Vector hu = hess.matrix() * u;
        const double value = dot(u, hu) + 2.0 * dot(g, u);
        if (value < best.value) {
            best.feasible = true;
            best.value = value;
            best.minimizer = u;
        }
    }
    return best;
}

}  // namespace oracles
