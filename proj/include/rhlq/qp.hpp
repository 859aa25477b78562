#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "rhlq/matrix.hpp"

namespace rhlq::qp {

using la::Matrix;
using la::SymMatrix;
using la::Vector;

struct ActiveSetOptions {
    double feas_tol = 1e-9;
    double dual_tol = 1e-9;
    std::size_t max_iter_factor = 100;  // budget = factor * (rows + 1)
};

struct QpSolution {
    Vector u;
    double objective;  // u'Hu + 2g'u (any constant term is the caller's)
    std::vector<std::size_t> active;
    Vector multipliers;  // one per active row, same order
    std::size_t iterations = 0;
};

namespace detail {

/// Equality-constrained step: minimize (u+p)'H(u+p) + 2g'(u+p) subject to
/// G_W p = 0, via the Schur complement on H's Cholesky factor. Also returns
/// the multipliers of the working rows at p = 0.
struct EqpStep {
    Vector p;
    Vector multipliers;  // for the KKT system scaled to the true gradient
};

inline EqpStep solve_eqp(const Matrix& chol, const SymMatrix& /*hess*/, const Vector& grad_half,
                         const Matrix& gmat, const std::vector<std::size_t>& working,
                         const Tolerances& tol) {
    const std::size_t nv = grad_half.size();
    const std::size_t nw = working.size();
    EqpStep out;
    if (nw == 0) {
        out.p = -la::cholesky_solve(chol, grad_half);
        out.multipliers = Vector(0);
        return out;
    }
    Matrix gw(nw, nv);
    for (std::size_t r = 0; r < nw; ++r)
        for (std::size_t c = 0; c < nv; ++c) gw(r, c) = gmat(working[r], c);
    const Matrix hinv_gwt = la::cholesky_solve(chol, gw.transpose());  // H^{-1} G_W'
    const Vector hinv_r = la::cholesky_solve(chol, grad_half);         // H^{-1} r
    const SymMatrix schur = la::symmetrize(gw * hinv_gwt);
    auto schur_chol = la::cholesky(schur, tol);
    if (!schur_chol) {
        // nearly dependent rows: the system stays consistent, so a small
        // diagonal shift recovers a usable multiplier split
        const double shift = 1e-10 * std::max(1.0, schur.frobenius_norm());
        schur_chol = la::cholesky(
            SymMatrix(schur.matrix() + Matrix::identity(nw) * shift), tol);
        if (!schur_chol) throw QpDegenerate("working set is numerically rank deficient");
    }
    const Vector nu = la::cholesky_solve(*schur_chol, -(gw * hinv_r));
    // p = -H^{-1}(r + G_W' nu)
    Vector rhs = grad_half;
    for (std::size_t i = 0; i < nv; ++i)
        for (std::size_t r = 0; r < nw; ++r) rhs[i] += gw(r, i) * nu[r];
    out.p = -la::cholesky_solve(chol, rhs);
    out.multipliers = 2.0 * nu;  // gradient of the objective is 2(Hu + g)
    return out;
}

}  // namespace detail

/// Primal active-set method for the strictly convex QP
///   minimize u'Hu + 2g'u   subject to   G u <= h.
/// Starts from a supplied feasible point with an empty working set; blocking
/// constraints are added with ties broken by lowest row index.
inline QpSolution solve_from(const SymMatrix& hess, const Vector& g, const Matrix& gmat,
                             const Vector& h, Vector u, const ActiveSetOptions& opts = {},
                             const Tolerances& tol = {}) {
    const std::size_t nv = hess.dim();
    const std::size_t rows = gmat.rows();
    const auto chol = la::cholesky(hess, tol);
    if (!chol) throw NotPositiveDefinite("QP Hessian must be positive definite");

    std::vector<std::size_t> working;
    std::vector<char> in_working(rows, 0);
    const std::size_t budget = opts.max_iter_factor * (rows + 1);
    const double step_tol = 1e-11;

    QpSolution sol;
    for (std::size_t it = 0; it < budget; ++it) {
        Vector grad_half = g;
        {
            const Vector hu = hess.matrix() * u;
            for (std::size_t i = 0; i < nv; ++i) grad_half[i] += hu[i];
        }
        const auto step = detail::solve_eqp(*chol, hess, grad_half, gmat, working, tol);
        if (step.p.max_abs() <= step_tol * std::max(1.0, u.max_abs())) {
            if (working.empty()) {
                sol.iterations = it + 1;
                break;
            }
            std::size_t drop = 0;
            double most_negative = -opts.dual_tol;
            bool found = false;
            for (std::size_t r = 0; r < working.size(); ++r) {
                if (step.multipliers[r] < most_negative) {
                    most_negative = step.multipliers[r];
                    drop = r;
                    found = true;
                }
            }
            if (!found) {
                sol.multipliers = step.multipliers;
                sol.iterations = it + 1;
                break;
            }
            in_working[working[drop]] = 0;
            working.erase(working.begin() + static_cast<std::ptrdiff_t>(drop));
            continue;
        }
        // ratio test over inactive rows; first (lowest-index) blocker wins ties
        double alpha = 1.0;
        std::size_t blocking = rows;
        const Vector gp = gmat * step.p;
        const Vector gu = gmat * u;
        for (std::size_t i = 0; i < rows; ++i) {
            if (in_working[i]) continue;
            if (gp[i] <= 1e-13 * std::max(1.0, step.p.max_abs())) continue;
            const double slack = h[i] - gu[i];
            const double ratio = std::max(0.0, slack) / gp[i];
            if (ratio < alpha - 1e-15) {
                alpha = ratio;
                blocking = i;
            }
        }
        u = u + step.p * alpha;
        if (blocking < rows) {
            working.insert(std::lower_bound(working.begin(), working.end(), blocking), blocking);
            in_working[blocking] = 1;
        }
        if (it + 1 == budget) throw QpMaxIterations("active-set iteration budget exhausted");
    }
    if (sol.iterations == 0) throw QpMaxIterations("active-set iteration budget exhausted");

    sol.u = u;
    const Vector hu = hess.matrix() * u;
    sol.objective = dot(u, hu) + 2.0 * dot(g, u);
    sol.active = working;
    if (sol.multipliers.size() != working.size()) {
        // recompute multipliers at the final point when we exited without them
        Vector grad_half = g;
        for (std::size_t i = 0; i < nv; ++i) grad_half[i] += hu[i];
        sol.multipliers = detail::solve_eqp(*chol, hess, grad_half, gmat, working, tol).multipliers;
    }
    return sol;
}

/// Unconstrained minimizer of u'Hu + 2g'u.
inline QpSolution solve_unconstrained(const SymMatrix& hess, const Vector& g,
                                      const Tolerances& tol = {}) {
    const auto chol = la::cholesky(hess, tol);
    if (!chol) throw NotPositiveDefinite("QP Hessian must be positive definite");
    QpSolution sol;
    sol.u = -la::cholesky_solve(*chol, g);
    const Vector hu = hess.matrix() * sol.u;
    sol.objective = dot(sol.u, hu) + 2.0 * dot(g, sol.u);
    sol.multipliers = Vector(0);
    sol.iterations = 1;
    return sol;
}

/// Full solve: tries the unconstrained minimizer, otherwise finds a feasible
/// point by a phase-1 QP in (u, s) that drives the common slack s to zero,
/// then runs the active-set loop. Throws QpInfeasible when the phase-1
/// optimum keeps a positive slack.
inline QpSolution solve(const SymMatrix& hess, const Vector& g, const Matrix& gmat,
                        const Vector& h, const ActiveSetOptions& opts = {},
                        const Tolerances& tol = {}) {
    const std::size_t nv = hess.dim();
    const std::size_t rows = gmat.rows();
    if (gmat.cols() != nv || h.size() != rows) throw DimensionError("QP constraint shapes");
    if (rows == 0) return solve_unconstrained(hess, g, tol);

    const QpSolution unc = solve_unconstrained(hess, g, tol);
    {
        const Vector gu = gmat * unc.u;
        bool feasible = true;
        for (std::size_t i = 0; i < rows; ++i)
            if (gu[i] > h[i] + opts.feas_tol) feasible = false;
        if (feasible) return unc;
    }

    // phase 1: minimize s^2 + delta |u - c|^2 subject to Gu - s <= h, from
    // the strictly feasible start u = c, s = max violation + 1. The delta
    // term keeps the subproblem strictly convex but biases the optimal slack
    // by about delta * |u - c|, so the center c is re-anchored at the
    // previous round's point: the bias dies out while conditioning stays
    // fixed. A slack that stops shrinking is a genuine violation.
    Matrix g1(rows, nv + 1);
    g1.set_block(0, 0, gmat);
    for (std::size_t i = 0; i < rows; ++i) g1(i, nv) = -1.0;
    const double delta = 1e-8;
    Matrix h1m(nv + 1, nv + 1);
    for (std::size_t i = 0; i < nv; ++i) h1m(i, i) = delta;
    h1m(nv, nv) = 1.0;
    const SymMatrix h1(h1m);

    Vector center(nv);
    double prev_slack = std::numeric_limits<double>::infinity();
    for (int round = 0; round < 8; ++round) {
        Vector z0(nv + 1);
        Vector g1v(nv + 1);
        double worst = 0.0;
        for (std::size_t i = 0; i < rows; ++i) {
            double row_c = 0.0;
            for (std::size_t j = 0; j < nv; ++j) row_c += gmat(i, j) * center[j];
            worst = std::max(worst, row_c - h[i]);
        }
        for (std::size_t i = 0; i < nv; ++i) {
            z0[i] = center[i];
            g1v[i] = -delta * center[i];
        }
        z0[nv] = worst + 1.0;
        const QpSolution phase1 = solve_from(h1, g1v, g1, h, z0, opts, tol);
        const double slack = phase1.u[nv];
        if (slack <= opts.feas_tol) {
            Vector u(nv);
            for (std::size_t i = 0; i < nv; ++i) u[i] = phase1.u[i];
            return solve_from(hess, g, gmat, h, u, opts, tol);
        }
        if (slack > 0.9 * prev_slack) break;
        prev_slack = slack;
        for (std::size_t i = 0; i < nv; ++i) center[i] = phase1.u[i];
    }
    throw QpInfeasible("no feasible point exists");
}

}  // namespace rhlq::qp
