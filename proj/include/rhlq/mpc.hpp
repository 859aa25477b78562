#pragma once

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "rhlq/model.hpp"
#include "rhlq/qp.hpp"

namespace rhlq::mpc {

using la::Matrix;
using la::SymMatrix;
using la::Vector;
using model::AffineConstraintSet;
using model::LqProblem;

/// Finite-horizon problem with affine path constraints imposed at stages
/// 0..N-1; there is no terminal-state constraint anywhere.
struct MpcProblem {
    LqProblem problem;
    std::size_t horizon;
    std::optional<AffineConstraintSet> constraints;

    MpcProblem(LqProblem p, std::size_t n, std::optional<AffineConstraintSet> cons = {})
        : problem(std::move(p)), horizon(n), constraints(std::move(cons)) {
        if (horizon == 0) throw DimensionError("horizon must be at least 1");
        if (constraints) {
            if (constraints->C.cols() != problem.n_x() || constraints->D.cols() != problem.n_u())
                throw DimensionError("constraint column counts do not match the problem");
        }
    }
};

/// Dense condensing of the finite-horizon problem over the stacked input
/// vector: objective(u; xhat) = u'Hu + 2u'(Gmap xhat) + xhat'C xhat, and
/// constraint rows G u <= -(Xmap xhat + e_stack).
struct CondensedQp {
    SymMatrix hessian;    // N n_u square
    Matrix gradient_map;  // N n_u x n_x, xhat -> linear term
    SymMatrix constant_map;  // n_x square, xhat -> constant term
    Matrix con_rows;      // N l x N n_u
    Matrix con_xmap;      // N l x n_x
    Vector con_offset;    // stacked e
    std::size_t n_u = 0;
    std::size_t horizon = 0;
    bool hessian_pd = true;

    double qp_value(const Vector& u, const Vector& xhat) const {
        const Vector hu = hessian.matrix() * u;
        const Vector gx = gradient_map * xhat;
        const Vector cx = constant_map.matrix() * xhat;
        return dot(u, hu) + 2.0 * dot(u, gx) + dot(xhat, cx);
    }
};

inline CondensedQp condense(const MpcProblem& mpc, const Tolerances& tol = {}) {
    const LqProblem& p = mpc.problem;
    const std::size_t n_x = p.n_x();
    const std::size_t n_u = p.n_u();
    const std::size_t n = mpc.horizon;

    // state prediction x = Phi xhat + Gamma u, stacking x_0..x_N
    Matrix phi((n + 1) * n_x, n_x);
    Matrix gamma((n + 1) * n_x, n * n_u);
    {
        Matrix power = Matrix::identity(n_x);  // A^k
        phi.set_block(0, 0, power);
        for (std::size_t k = 1; k <= n; ++k) {
            // Gamma block row k: [A^{k-1}B, ..., B, 0, ...]
            for (std::size_t i = 0; i < k; ++i) {
                const Matrix prev = gamma.block((k - 1) * n_x, i * n_u, n_x, n_u);
                if (i + 1 == k)
                    gamma.set_block(k * n_x, i * n_u, p.sys.B);
                else
                    gamma.set_block(k * n_x, i * n_u, p.sys.A * prev);
            }
            power = p.sys.A * power;
            phi.set_block(k * n_x, 0, power);
        }
    }

    // stage-cost stacking: Qtil = blkdiag(Q,...,Q,Pf), Stil pairs stage
    // inputs with stage states, Rtil = blkdiag(R,...,R)
    Matrix qtil((n + 1) * n_x, (n + 1) * n_x);
    for (std::size_t k = 0; k < n; ++k) qtil.set_block(k * n_x, k * n_x, p.cost.Q.matrix());
    qtil.set_block(n * n_x, n * n_x, p.terminal.Pf.matrix());
    Matrix stil(n * n_u, (n + 1) * n_x);
    for (std::size_t k = 0; k < n; ++k) stil.set_block(k * n_u, k * n_x, p.cost.S);
    Matrix rtil(n * n_u, n * n_u);
    for (std::size_t k = 0; k < n; ++k) rtil.set_block(k * n_u, k * n_u, p.cost.R.matrix());

    CondensedQp qp;
    qp.n_u = n_u;
    qp.horizon = n;
    const Matrix qg = qtil * gamma;
    const Matrix sg = stil * gamma;
    qp.hessian = la::symmetrize(gamma.transpose() * qg + sg + sg.transpose() + rtil);
    qp.gradient_map = gamma.transpose() * (qtil * phi) + stil * phi;
    qp.constant_map = la::symmetrize(phi.transpose() * (qtil * phi));
    qp.hessian_pd = la::cholesky(qp.hessian, tol).has_value();

    if (mpc.constraints) {
        const AffineConstraintSet& cs = *mpc.constraints;
        const std::size_t l = cs.rows();
        qp.con_rows = Matrix(n * l, n * n_u);
        qp.con_xmap = Matrix(n * l, n_x);
        qp.con_offset = Vector(n * l);
        for (std::size_t k = 0; k < n; ++k) {
            const Matrix phik = phi.block(k * n_x, 0, n_x, n_x);
            const Matrix gammak = gamma.block(k * n_x, 0, n_x, n * n_u);
            Matrix rowk = cs.C * gammak;
            // the direct input term lands in stage k's columns
            for (std::size_t i = 0; i < l; ++i)
                for (std::size_t j = 0; j < n_u; ++j) rowk(i, k * n_u + j) += cs.D(i, j);
            qp.con_rows.set_block(k * l, 0, rowk);
            qp.con_xmap.set_block(k * l, 0, cs.C * phik);
            for (std::size_t i = 0; i < l; ++i) qp.con_offset[k * l + i] = cs.e[i];
        }
    }
    return qp;
}

struct QpSolveOutcome {
    Vector u_stack;
    double value;  // full objective including the xhat-dependent constant
    std::vector<std::size_t> active_set;
    std::size_t iterations;
};

/// Solves the condensed QP at the given state.
inline QpSolveOutcome solve_qp(const CondensedQp& qp, const Vector& xhat,
                               const qp::ActiveSetOptions& opts = {}, const Tolerances& tol = {}) {
    if (!qp.hessian_pd)
        throw NotPositiveDefinite("condensed Hessian is not positive definite");
    const Vector g = qp.gradient_map * xhat;
    qp::QpSolution sol;
    if (qp.con_rows.empty()) {
        sol = qp::solve_unconstrained(qp.hessian, g, tol);
    } else {
        Vector h = -(qp.con_xmap * xhat);
        for (std::size_t i = 0; i < h.size(); ++i) h[i] -= qp.con_offset[i];
        sol = qp::solve(qp.hessian, g, qp.con_rows, h, opts, tol);
    }
    const Vector cx = qp.constant_map.matrix() * xhat;
    return QpSolveOutcome{sol.u, sol.objective + dot(xhat, cx), sol.active, sol.iterations};
}

enum class TraceStatus { Completed, Diverged, QpFailed };

inline const char* to_string(TraceStatus s) {
    switch (s) {
        case TraceStatus::Completed: return "completed";
        case TraceStatus::Diverged: return "diverged";
        case TraceStatus::QpFailed: return "qp_failed";
    }
    return "?";
}

/// Receding-horizon closed-loop record: states are one longer than inputs;
/// qp_values[j] is the optimal objective of the problem solved at step j.
struct ClosedLoopTrace {
    std::vector<Vector> states;
    std::vector<Vector> inputs;
    std::vector<double> qp_values;
    std::vector<std::size_t> active_counts;
    TraceStatus status = TraceStatus::Completed;
};

/// Simulates x_{j+1} = A x_j + B u0* for n_sim steps, re-solving the QP at
/// the measured state each step. A state norm beyond 1e12 records Diverged;
/// a per-step QP failure aborts with the partial trace.
inline ClosedLoopTrace simulate(const MpcProblem& mpc, const Vector& xhat0, std::size_t n_sim,
                                const qp::ActiveSetOptions& opts = {}, const Tolerances& tol = {}) {
    if (xhat0.size() != mpc.problem.n_x()) throw DimensionError("initial state size mismatch");
    const CondensedQp qp = condense(mpc, tol);
    ClosedLoopTrace trace;
    trace.states.push_back(xhat0);
    for (std::size_t j = 0; j < n_sim; ++j) {
        const Vector& x = trace.states.back();
        if (x.norm() > 1e12) {
            trace.status = TraceStatus::Diverged;
            return trace;
        }
        QpSolveOutcome out;
        try {
            out = solve_qp(qp, x, opts, tol);
        } catch (const Error&) {
            trace.status = TraceStatus::QpFailed;
            return trace;
        }
        Vector u0(mpc.problem.n_u());
        for (std::size_t i = 0; i < u0.size(); ++i) u0[i] = out.u_stack[i];
        trace.inputs.push_back(u0);
        trace.qp_values.push_back(out.value);
        trace.active_counts.push_back(out.active_set.size());
        trace.states.push_back(mpc.problem.sys.A * x + mpc.problem.sys.B * u0);
    }
    return trace;
}

}  // namespace rhlq::mpc
