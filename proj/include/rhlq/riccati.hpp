#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "rhlq/eigen.hpp"
#include "rhlq/matrix.hpp"
#include "rhlq/model.hpp"

namespace rhlq::riccati {

using la::Matrix;
using la::SymMatrix;
using model::LinearSystem;
using model::LqProblem;
using model::StageCost;
using model::StorageMatrix;

enum class SolutionKind { Stabilizing, Antistabilizing, Mixed };

inline const char* to_string(SolutionKind k) {
    switch (k) {
        case SolutionKind::Stabilizing: return "stabilizing";
        case SolutionKind::Antistabilizing: return "antistabilizing";
        case SolutionKind::Mixed: return "mixed";
    }
    return "?";
}

/// A symmetric solution of the DARE together with its feedback, spectral
/// classification and equation residual.
struct DareSolution {
    SymMatrix P;
    Matrix K;
    SolutionKind classification;
    la::Spectrum closed_loop_spectrum;
    double residual;
};

/// P_0..P_N and K_1..K_N of the finite-horizon recursion; K_seq[i] is
/// K_{i+1}, the feedback computed from P_seq[i].
struct RiccatiTrajectory {
    std::vector<SymMatrix> P_seq;
    std::vector<Matrix> K_seq;
    std::size_t horizon = 0;
};

namespace detail {

inline SymMatrix inner_matrix(const StageCost& cost, const LinearSystem& sys, const SymMatrix& p) {
    return SymMatrix(cost.R.matrix() + la::sandwich(sys.B, p).matrix());
}

inline void require_inner_nonsingular(const SymMatrix& w, const Tolerances& tol) {
    const auto evs = la::symmetric_eigenvalues(w);
    double min_abs = std::numeric_limits<double>::infinity();
    for (double ev : evs) min_abs = std::min(min_abs, std::abs(ev));
    if (min_abs <= tol.singular_tol * std::max(1.0, w.frobenius_norm()))
        throw SingularInnerMatrix("R + B'PB is singular to tolerance");
}

}  // namespace detail

/// K = (R + B'PB)^{-1} (S + B'PA).
inline Matrix feedback(const StageCost& cost, const LinearSystem& sys, const SymMatrix& p,
                       const Tolerances& tol = {}) {
    const SymMatrix w = detail::inner_matrix(cost, sys, p);
    detail::require_inner_nonsingular(w, tol);
    const Matrix z = cost.S + sys.B.transpose() * p.matrix() * sys.A;
    return la::solve(w.matrix(), z, tol);
}

inline Matrix feedback(const LqProblem& p, const SymMatrix& sol, const Tolerances& tol = {}) {
    return feedback(p.cost, p.sys, sol, tol);
}

/// One step of the Riccati recursion:
/// P+ = Q + A'PA - (S' + A'PB) K,  K = (R + B'PB)^{-1} (S + B'PA).
inline std::pair<SymMatrix, Matrix> riccati_step(const SymMatrix& p, const StageCost& cost,
                                                 const LinearSystem& sys,
                                                 const Tolerances& tol = {}) {
    const SymMatrix w = detail::inner_matrix(cost, sys, p);
    detail::require_inner_nonsingular(w, tol);
    const Matrix z = cost.S + sys.B.transpose() * p.matrix() * sys.A;  // S + B'PA
    const Matrix k = la::solve(w.matrix(), z, tol);
    const SymMatrix p_next = SymMatrix(cost.Q.matrix() + la::sandwich(sys.A, p).matrix() -
                                       la::sym_product(z.transpose(), k).matrix());
    return {p_next, k};
}

inline std::pair<SymMatrix, Matrix> riccati_step(const SymMatrix& p, const LqProblem& prob,
                                                 const Tolerances& tol = {}) {
    return riccati_step(p, prob.cost, prob.sys, tol);
}

/// Frobenius residual of P in the DARE.
inline double dare_residual(const StageCost& cost, const LinearSystem& sys, const SymMatrix& p,
                            const Tolerances& tol = {}) {
    const auto [next, k] = riccati_step(p, cost, sys, tol);
    return (next.matrix() - p.matrix()).frobenius_norm();
}

inline double dare_residual(const LqProblem& prob, const SymMatrix& p,
                            const Tolerances& tol = {}) {
    return dare_residual(prob.cost, prob.sys, p, tol);
}

/// Assembles a DareSolution from a candidate P: recomputes the feedback,
/// classifies by the closed-loop spectrum at the Schur margin, and records
/// the equation residual.
inline DareSolution make_solution(const LqProblem& prob, const SymMatrix& p,
                                  const Tolerances& tol = {}) {
    const Matrix k = feedback(prob, p, tol);
    const la::Spectrum sp = la::eigenvalues(prob.sys.A - prob.sys.B * k);
    bool all_inside = true;
    bool all_outside = true;
    for (const auto& mu : sp.eigenvalues) {
        const double m = std::abs(mu);
        all_inside = all_inside && (m < 1.0 - tol.schur_margin);
        all_outside = all_outside && (m > 1.0 + tol.schur_margin);
    }
    const SolutionKind kind = all_inside    ? SolutionKind::Stabilizing
                              : all_outside ? SolutionKind::Antistabilizing
                                            : SolutionKind::Mixed;
    return DareSolution{p, k, kind, sp, dare_residual(prob, p, tol)};
}

/// Finite-horizon recursion from P_0 = P^f.
inline RiccatiTrajectory iterate(const LqProblem& prob, std::size_t horizon,
                                 const Tolerances& tol = {}) {
    if (horizon == 0) throw DimensionError("horizon must be at least 1");
    RiccatiTrajectory traj;
    traj.horizon = horizon;
    traj.P_seq.reserve(horizon + 1);
    traj.K_seq.reserve(horizon);
    traj.P_seq.push_back(prob.terminal.Pf);
    for (std::size_t n = 0; n < horizon; ++n) {
        auto [p_next, k_next] = riccati_step(traj.P_seq.back(), prob, tol);
        traj.P_seq.push_back(std::move(p_next));
        traj.K_seq.push_back(std::move(k_next));
    }
    return traj;
}

// ---------------------------------------------------------------------------
// solution-set enumeration (state dimension <= 2)
// ---------------------------------------------------------------------------

struct EnumerateOptions {
    std::size_t starts = 300;
    std::size_t newton_iters = 80;
    std::uint64_t seed = 2024;
};

namespace detail {

inline std::vector<double> pack_sym(const SymMatrix& p) {
    std::vector<double> x;
    for (std::size_t i = 0; i < p.dim(); ++i)
        for (std::size_t j = i; j < p.dim(); ++j) x.push_back(p(i, j));
    return x;
}

inline SymMatrix unpack_sym(const std::vector<double>& x, std::size_t n) {
    Matrix m(n, n);
    std::size_t idx = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            m(i, j) = x[idx];
            m(j, i) = x[idx];
            ++idx;
        }
    return SymMatrix(m);
}

/// DARE residual as a map over the packed symmetric entries; nullopt when
/// the inner matrix is singular at the probe point.
inline std::optional<std::vector<double>> dare_residual_vec(const StageCost& cost,
                                                            const LinearSystem& sys,
                                                            const std::vector<double>& x,
                                                            const Tolerances& tol) {
    const std::size_t n = sys.n_x();
    try {
        const SymMatrix p = unpack_sym(x, n);
        const auto [next, k] = riccati_step(p, cost, sys, tol);
        return pack_sym(SymMatrix(p.matrix() - next.matrix()));
    } catch (const SingularInnerMatrix&) {
        return std::nullopt;
    } catch (const NonFiniteError&) {
        return std::nullopt;
    }
}

/// One Newton iteration run on the packed DARE residual with a
/// finite-difference Jacobian; returns the refined point, or nullopt when
/// the iteration broke down or left the basin.
inline std::optional<std::vector<double>> newton_on_residual(const StageCost& cost,
                                                             const LinearSystem& sys,
                                                             std::vector<double> x,
                                                             std::size_t iters,
                                                             const Tolerances& tol) {
    const std::size_t d = x.size();
    bool converged = false;
    for (std::size_t it = 0; it < iters; ++it) {
        const auto f = dare_residual_vec(cost, sys, x, tol);
        if (!f) return std::nullopt;
        double fnorm = 0.0;
        double xnorm = 0.0;
        for (double v : *f) fnorm += v * v;
        for (double v : x) xnorm += v * v;
        fnorm = std::sqrt(fnorm);
        xnorm = std::sqrt(xnorm);
        if (fnorm <= 1e-13 * std::max(1.0, xnorm)) {
            converged = true;
            break;
        }
        Matrix jac(d, d);
        for (std::size_t j = 0; j < d; ++j) {
            std::vector<double> xp = x;
            const double h = 1e-7 * std::max(1.0, std::abs(x[j]));
            xp[j] += h;
            const auto fp = dare_residual_vec(cost, sys, xp, tol);
            if (!fp) return std::nullopt;
            for (std::size_t i = 0; i < d; ++i) jac(i, j) = ((*fp)[i] - (*f)[i]) / h;
        }
        try {
            la::Vector rhs(d);
            for (std::size_t i = 0; i < d; ++i) rhs[i] = -(*f)[i];
            const la::Vector step = la::solve(jac, rhs, tol);
            if (!std::isfinite(step.norm()) || step.norm() > 1e8) return std::nullopt;
            for (std::size_t i = 0; i < d; ++i) x[i] += step[i];
            converged = true;  // at least one productive step
        } catch (const SingularMatrix&) {
            return std::nullopt;
        }
    }
    return converged ? std::optional<std::vector<double>>(std::move(x)) : std::nullopt;
}

/// Tightens an approximate solution by a few Newton steps; keeps the input
/// when polishing does not improve the residual.
inline SymMatrix polish_solution(const StageCost& cost, const LinearSystem& sys,
                                 const SymMatrix& p, const Tolerances& tol) {
    const auto refined = newton_on_residual(cost, sys, pack_sym(p), 4, tol);
    if (!refined) return p;
    const SymMatrix cand = unpack_sym(*refined, sys.n_x());
    try {
        if (dare_residual(cost, sys, cand, tol) < dare_residual(cost, sys, p, tol)) return cand;
    } catch (const SingularInnerMatrix&) {
    }
    return p;
}

}  // namespace detail

/// All isolated symmetric DARE solutions found by a deterministic multistart
/// Newton search on the residual, for n_x <= 2 (the scalar case also seeds
/// the closed-form quadratic roots). Solutions whose inner matrix R + B'PB is
/// singular are not representable (no feedback) and are dropped.
inline std::vector<DareSolution> enumerate_solutions(const LqProblem& prob,
                                                     const EnumerateOptions& opts = {},
                                                     const Tolerances& tol = {}) {
    const std::size_t n = prob.n_x();
    if (n > 2) throw DimensionError("solution enumeration is provided for n_x <= 2 only");
    const std::size_t d = n * (n + 1) / 2;

    std::vector<std::vector<double>> starts;
    starts.push_back(std::vector<double>(d, 0.0));

    if (n == 1 && prob.n_u() == 1) {
        // scalar closed form: B^2 P^2 + (R - Q B^2 - A^2 R + 2 A B S) P + (S^2 - Q R) = 0
        const double a_ = prob.sys.A(0, 0);
        const double b_ = prob.sys.B(0, 0);
        const double q_ = prob.cost.Q(0, 0);
        const double s_ = prob.cost.S(0, 0);
        const double r_ = prob.cost.R(0, 0);
        const double ca = b_ * b_;
        const double cb = r_ - q_ * ca - a_ * a_ * r_ + 2.0 * a_ * b_ * s_;
        const double cc = s_ * s_ - q_ * r_;
        if (std::abs(ca) > 1e-300) {
            const double disc = cb * cb - 4.0 * ca * cc;
            if (disc >= 0.0) {
                const double sq = std::sqrt(disc);
                starts.push_back({(-cb + sq) / (2.0 * ca)});
                starts.push_back({(-cb - sq) / (2.0 * ca)});
            }
        } else if (std::abs(cb) > 1e-300) {
            starts.push_back({-cc / cb});
        }
    }

    const double scale = 3.0 * std::max({1.0, prob.cost.Q.frobenius_norm(),
                                         prob.cost.R.frobenius_norm(),
                                         prob.cost.S.frobenius_norm(),
                                         prob.sys.A.frobenius_norm() *
                                             prob.sys.A.frobenius_norm()});
    Rng rng(opts.seed);
    for (std::size_t s = 0; s < opts.starts; ++s) {
        std::vector<double> x(d);
        for (double& v : x) v = rng.uniform(-scale, scale);
        starts.push_back(std::move(x));
    }

    std::vector<SymMatrix> found;
    for (const auto& start : starts) {
        std::vector<double> x = start;
        bool ok = false;
        for (std::size_t it = 0; it < opts.newton_iters; ++it) {
            const auto f = detail::dare_residual_vec(prob.cost, prob.sys, x, tol);
            if (!f) break;
            double fnorm = 0.0;
            double xnorm = 0.0;
            for (double v : *f) fnorm += v * v;
            for (double v : x) xnorm += v * v;
            fnorm = std::sqrt(fnorm);
            xnorm = std::sqrt(xnorm);
            if (fnorm <= 1e-12 * std::max(1.0, xnorm)) {
                ok = true;
                break;
            }
            // finite-difference Jacobian of the packed residual
            Matrix jac(d, d);
            bool jac_ok = true;
            for (std::size_t j = 0; j < d; ++j) {
                std::vector<double> xp = x;
                const double h = 1e-7 * std::max(1.0, std::abs(x[j]));
                xp[j] += h;
                const auto fp = detail::dare_residual_vec(prob.cost, prob.sys, xp, tol);
                if (!fp) {
                    jac_ok = false;
                    break;
                }
                for (std::size_t i = 0; i < d; ++i) jac(i, j) = ((*fp)[i] - (*f)[i]) / h;
            }
            if (!jac_ok) break;
            try {
                la::Vector rhs(d);
                for (std::size_t i = 0; i < d; ++i) rhs[i] = -(*f)[i];
                const la::Vector step = la::solve(jac, rhs, tol);
                if (!std::isfinite(step.norm()) || step.norm() > 1e8) break;
                for (std::size_t i = 0; i < d; ++i) x[i] += step[i];
            } catch (const SingularMatrix&) {
                break;
            }
        }
        if (!ok) continue;
        const SymMatrix p = detail::unpack_sym(x, n);
        const double pn = std::max(1.0, p.frobenius_norm());
        bool duplicate = false;
        for (const auto& q : found)
            if ((p.matrix() - q.matrix()).frobenius_norm() <= 1e-6 * pn) duplicate = true;
        if (duplicate) continue;
        try {
            const DareSolution sol = make_solution(prob, p, tol);
            if (sol.residual <= tol.residual_tol * std::max(1.0, p.frobenius_norm()))
                found.push_back(p);
        } catch (const SingularInnerMatrix&) {
            // not representable as a solution with feedback
        }
    }

    std::sort(found.begin(), found.end(), [](const SymMatrix& a, const SymMatrix& b) {
        return a.matrix().trace() < b.matrix().trace();
    });
    std::vector<DareSolution> out;
    out.reserve(found.size());
    for (const auto& p : found) out.push_back(make_solution(prob, p, tol));
    return out;
}

// ---------------------------------------------------------------------------
// stabilizing branch
// ---------------------------------------------------------------------------

namespace detail {

/// Fixed-point iteration from P_0 = 0 for a problem whose stage cost is
/// already positive definite; converges monotonically to the stabilizing
/// solution when the pair is stabilizable. Near-marginal closed loops can
/// stall inside the budget; the caller polishes with Newton steps and
/// enforces the residual, so the best iterate is returned either way.
inline SymMatrix iterate_to_fixed_point(const StageCost& cost, const LinearSystem& sys,
                                        const Tolerances& tol) {
    SymMatrix p = SymMatrix::zeros(sys.n_x());
    for (std::size_t n = 0; n < tol.riccati_max_iter; ++n) {
        auto [p_next, k] = riccati_step(p, cost, sys, tol);
        const double step = (p_next.matrix() - p.matrix()).frobenius_norm();
        p = std::move(p_next);
        if (step <= tol.riccati_rel_tol * std::max(1.0, p.frobenius_norm())) return p;
        if (p.frobenius_norm() > 1e100)
            throw NonConvergence("Riccati fixed-point iteration diverged");
    }
    return p;
}

}  // namespace detail

std::optional<StorageMatrix> find_certificate(const LqProblem& prob, const Tolerances& tol = {});

/// Unique stabilizing DARE solution. Requires a strict pre-dissipativity
/// certificate: either the supplied storage or one found automatically
/// (H itself positive definite, or the suggestion heuristic for n_x <= 2).
/// Solves by iterating the rotated problem from P_0 = 0 and un-rotating via
/// P_s = P_{s,Lambda} - Lambda.
inline DareSolution solve_dare_stabilizing(const LqProblem& prob,
                                           std::optional<StorageMatrix> storage = {},
                                           const Tolerances& tol = {}) {
    if (!model::is_stabilizable(prob.sys, tol.rank_tol))
        throw NotStabilizable("the pair (A, B) is not stabilizable");
    StorageMatrix lam{SymMatrix::zeros(prob.n_x())};
    if (storage) {
        const auto rep = model::check_predissipativity(prob.cost, prob.sys, *storage, tol.pd_tol);
        if (rep.verdict != model::DissipativityVerdict::Strict)
            throw NoCertificate("supplied storage matrix is not a strict certificate");
        lam = *storage;
    } else {
        const auto cert = find_certificate(prob, tol);
        if (!cert) throw NoCertificate("no strict storage certificate available");
        lam = *cert;
    }
    const StageCost rotated = model::rotate_cost(prob.cost, prob.sys, lam);
    const SymMatrix p_rot = detail::iterate_to_fixed_point(rotated, prob.sys, tol);
    const SymMatrix p = detail::polish_solution(
        prob.cost, prob.sys, SymMatrix(p_rot.matrix() - lam.Lambda.matrix()), tol);
    DareSolution sol = make_solution(prob, p, tol);
    if (sol.residual > tol.residual_tol * std::max(1.0, p.frobenius_norm()))
        throw NonConvergence("stabilizing solve did not reach the residual tolerance");
    return sol;
}

// ---------------------------------------------------------------------------
// reverse equation
// ---------------------------------------------------------------------------

/// Data of the reverse DARE: Abar = A^{-1}, Bbar = A^{-1}B,
/// Qbar = -Abar'Q Abar, Sbar = S Abar - Bbar'Q Abar,
/// Rbar = -R + S Bbar + Bbar'S' - Bbar'Q Bbar. When A is singular the
/// blocks are built from the pre-stabilized problem (khat recorded).
struct RdareData {
    Matrix Abar;
    Matrix Bbar;
    SymMatrix Qbar;
    SymMatrix Rbar;
    Matrix Sbar;
    Matrix khat;  // prestabilizer actually used (zero when A was invertible)
};

inline RdareData build_rdare(const LqProblem& prob, std::optional<Matrix> khat = {},
                             const Tolerances& tol = {}) {
    Matrix k = khat.value_or(Matrix(prob.n_u(), prob.n_x()));
    if (!khat) {
        const Matrix& a = prob.sys.A;
        if (std::abs(la::determinant(a, tol)) <= 1e-9 * std::max(1.0, a.frobenius_norm()))
            k = model::make_invertible_prestabilizer(prob.sys);
    }
    const LqProblem pp = (k.max_abs() == 0.0) ? prob : model::prestabilize(prob, k);
    const Matrix abar = la::inverse(pp.sys.A, tol);
    const Matrix bbar = abar * pp.sys.B;
    const SymMatrix qbar = -la::sandwich(abar, pp.cost.Q);
    const Matrix sbar = pp.cost.S * abar - bbar.transpose() * pp.cost.Q.matrix() * abar;
    const Matrix sb = pp.cost.S * bbar;  // S Bbar, symmetric part enters twice
    const SymMatrix rbar = SymMatrix(-pp.cost.R.matrix() + sb + sb.transpose() -
                                     la::sandwich(bbar, pp.cost.Q).matrix());
    return RdareData{abar, bbar, qbar, rbar, sbar, k};
}

inline LqProblem rdare_as_problem(const RdareData& rd) {
    return LqProblem(LinearSystem(rd.Abar, rd.Bbar), StageCost(rd.Qbar, rd.Sbar, rd.Rbar),
                     model::TerminalCost{SymMatrix::zeros(rd.Abar.rows())});
}

/// Stabilizing solution of the RDARE with its feedback and closed loop.
struct RdareSolution {
    SymMatrix Pbar;
    Matrix Kbar;
    la::Spectrum closed_loop_spectrum;  // of Abar - Bbar Kbar
    RdareData data;                     // blocks of the (pre-stabilized) reverse equation
};

/// Solves the RDARE for its stabilizing solution. Uses the sign symmetry of
/// the equation: with a strict certificate the rotated reverse cost -Hbar is
/// positive definite, the plain fixed-point iteration applies, and flipping
/// the sign of the result (feedback unchanged) yields Pbar_s of the rotated
/// problem, which un-rotates by subtracting Lambda.
inline RdareSolution solve_rdare_stabilizing(const LqProblem& prob,
                                             std::optional<StorageMatrix> storage = {},
                                             const Tolerances& tol = {}) {
    if (!model::is_controllable(prob.sys, tol.rank_tol))
        throw NotControllable("the RDARE path requires a controllable pair (A, B)");
    StorageMatrix lam{SymMatrix::zeros(prob.n_x())};
    if (storage) {
        const auto rep = model::check_predissipativity(prob.cost, prob.sys, *storage, tol.pd_tol);
        if (rep.verdict != model::DissipativityVerdict::Strict)
            throw NoCertificate("supplied storage matrix is not a strict certificate");
        lam = *storage;
    } else {
        const auto cert = find_certificate(prob, tol);
        if (!cert) throw NoCertificate("no strict storage certificate available");
        lam = *cert;
    }

    // prestabilize first if A is singular; the RDARE solution set is
    // unaffected and the certificate carries over unchanged
    Matrix khat(prob.n_u(), prob.n_x());
    if (std::abs(la::determinant(prob.sys.A, tol)) <=
        1e-9 * std::max(1.0, prob.sys.A.frobenius_norm()))
        khat = model::make_invertible_prestabilizer(prob.sys);
    const LqProblem pp = (khat.max_abs() == 0.0) ? prob : model::prestabilize(prob, khat);

    const StageCost rotated = model::rotate_cost(pp.cost, pp.sys, lam);
    const LqProblem rotated_prob(pp.sys, rotated, pp.terminal);
    RdareData rd = build_rdare(rotated_prob, Matrix(prob.n_u(), prob.n_x()), tol);
    rd.khat = khat;

    const LinearSystem sys_bar(rd.Abar, rd.Bbar);
    const StageCost negated(-rd.Qbar, -rd.Sbar, -rd.Rbar);  // positive definite
    const SymMatrix p_flip = detail::iterate_to_fixed_point(negated, sys_bar, tol);
    const StageCost rd_cost(rd.Qbar, rd.Sbar, rd.Rbar);
    const SymMatrix pbar_rot = detail::polish_solution(rd_cost, sys_bar, -p_flip, tol);
    if (dare_residual(rd_cost, sys_bar, pbar_rot, tol) >
        tol.residual_tol * std::max(1.0, pbar_rot.frobenius_norm()))
        throw NonConvergence("reverse solve did not reach the residual tolerance");
    const Matrix kbar = feedback(rd_cost, sys_bar, pbar_rot, tol);
    const la::Spectrum sp = la::eigenvalues(rd.Abar - rd.Bbar * kbar);
    if (sp.spectral_radius >= 1.0 - tol.schur_margin)
        throw NonConvergence("reverse solve did not produce a stabilizing solution");
    const SymMatrix pbar = SymMatrix(pbar_rot.matrix() - lam.Lambda.matrix());
    return RdareSolution{pbar, kbar, sp, rd};
}

// ---------------------------------------------------------------------------
// antistabilizing branch
// ---------------------------------------------------------------------------

struct AntistabExistence {
    bool exists;
    double witness_det;  // det [[R, S], [B, A]]
};

/// Existence of the antistabilizing DARE solution is equivalent to the
/// nonsingularity of [[R, S], [B, A]]. The determinant is invariant under
/// both pre-stabilization and cost rotation, so the verdict is intrinsic to
/// the problem.
inline AntistabExistence antistab_existence_test(const LqProblem& prob,
                                                 const Tolerances& tol = {}) {
    const std::size_t n_x = prob.n_x();
    const std::size_t n_u = prob.n_u();
    Matrix m(n_u + n_x, n_u + n_x);
    m.set_block(0, 0, prob.cost.R.matrix());
    m.set_block(0, n_u, prob.cost.S);
    m.set_block(n_u, 0, prob.sys.B);
    m.set_block(n_u, n_u, prob.sys.A);
    const double det = la::determinant(m, tol);
    const double scale =
        std::max(1.0, std::pow(m.frobenius_norm(), static_cast<double>(n_u + n_x)));
    return {std::abs(det) > tol.antistab_det_tol * scale, det};
}

/// Outcome of the antistabilizing solve: the solution when it exists,
/// otherwise the stabilizing RDARE solution as the designated substitute.
struct AntistabResult {
    std::optional<DareSolution> solution;
    SymMatrix rdare_substitute;  // Pbar_s; equals P_a when the solution exists
    double witness_det;
};

inline AntistabResult solve_dare_antistabilizing(const LqProblem& prob,
                                                 std::optional<StorageMatrix> storage = {},
                                                 const Tolerances& tol = {}) {
    const RdareSolution rd = solve_rdare_stabilizing(prob, storage, tol);
    const AntistabExistence ex = antistab_existence_test(prob, tol);
    if (!ex.exists) return {std::nullopt, rd.Pbar, ex.witness_det};
    const SymMatrix p_a = detail::polish_solution(prob.cost, prob.sys, rd.Pbar, tol);
    DareSolution sol = make_solution(prob, p_a, tol);
    if (sol.residual > tol.residual_tol * std::max(1.0, p_a.frobenius_norm()))
        throw NonConvergence("antistabilizing candidate does not satisfy the DARE");
    return {std::move(sol), p_a, ex.witness_det};
}

// ---------------------------------------------------------------------------
// solution gaps
// ---------------------------------------------------------------------------

enum class GapKind { VsStabilizing, VsAntistabilizing };

/// Delta = P - P_ref satisfies its own Riccati equation in the input-only
/// problem with system (A_ref, B) and input weight R_ref = R + B'P_ref B.
struct SolutionGap {
    SymMatrix Delta;
    SymMatrix R_ref;
    Matrix A_ref;
    GapKind kind;
    double residual;
};

inline SolutionGap gap(const LqProblem& prob, const SymMatrix& p, const DareSolution& ref,
                       const Tolerances& tol = {}) {
    GapKind kind;
    switch (ref.classification) {
        case SolutionKind::Stabilizing: kind = GapKind::VsStabilizing; break;
        case SolutionKind::Antistabilizing: kind = GapKind::VsAntistabilizing; break;
        default: throw Error("gap reference must be classified stabilizing or antistabilizing");
    }
    const SymMatrix delta = SymMatrix(p.matrix() - ref.P.matrix());
    const SymMatrix r_ref = detail::inner_matrix(prob.cost, prob.sys, ref.P);
    const Matrix a_ref = prob.sys.A - prob.sys.B * ref.K;
    // the gap equation is the Riccati step of the input-only problem
    const StageCost gap_cost(SymMatrix::zeros(prob.n_x()), Matrix(prob.n_u(), prob.n_x()), r_ref);
    const LinearSystem gap_sys(a_ref, prob.sys.B);
    const auto [next, k] = riccati_step(delta, gap_cost, gap_sys, tol);
    const double residual = (next.matrix() - delta.matrix()).frobenius_norm();
    return SolutionGap{delta, r_ref, a_ref, kind, residual};
}

/// R + B'PB must be positive definite for any DARE solution of a strictly
/// pre-dissipative stabilizable problem; exposed as an assertion helper.
inline bool verify_inner_pd(const LqProblem& prob, const SymMatrix& p, const Tolerances& tol = {}) {
    return la::definiteness(detail::inner_matrix(prob.cost, prob.sys, p), tol.pd_tol) ==
           la::Definiteness::PositiveDefinite;
}

}  // namespace rhlq::riccati

namespace rhlq::model {

/// A storage candidate with its certification verdict.
struct StorageCandidate {
    StorageMatrix storage;
    DissipativityReport report;
};

/// Best-effort storage suggestion, ordered: Lambda = -(Pbar_s + P_s)/2 first
/// (interior of the admissible cone), then Lambda = -Pbar_s (guaranteed
/// semidefinite rotation). Needs P_s and Pbar_s, bootstrapped either from a
/// positive definite stage cost or, for n_x <= 2, from solution-set
/// enumeration. Verdicts are reported as computed; no candidate is ever
/// promoted to strict without passing the check.
inline std::vector<StorageCandidate> suggest_storage(const LqProblem& prob,
                                                     const Tolerances& tol = {}) {
    const std::size_t n = prob.n_x();
    SymMatrix p_s;
    SymMatrix pbar_s;
    const auto zero_report =
        check_predissipativity(prob.cost, prob.sys, StorageMatrix{SymMatrix::zeros(n)},
                               tol.pd_tol);
    if (zero_report.verdict == DissipativityVerdict::Strict) {
        p_s = riccati::solve_dare_stabilizing(prob, StorageMatrix{SymMatrix::zeros(n)}, tol).P;
        pbar_s =
            riccati::solve_rdare_stabilizing(prob, StorageMatrix{SymMatrix::zeros(n)}, tol).Pbar;
    } else if (n <= 2) {
        for (const auto& sol : riccati::enumerate_solutions(prob, {}, tol))
            if (sol.classification == riccati::SolutionKind::Stabilizing) p_s = sol.P;
        const auto rd = riccati::build_rdare(prob, {}, tol);
        for (const auto& sol : riccati::enumerate_solutions(riccati::rdare_as_problem(rd), {}, tol))
            if (sol.classification == riccati::SolutionKind::Stabilizing) pbar_s = sol.P;
        if (p_s.empty() || pbar_s.empty())
            throw NoCertificate("storage suggestion could not locate P_s and Pbar_s");
    } else {
        throw NoCertificate(
            "storage suggestion needs a positive definite stage cost or n_x <= 2; "
            "supply a storage matrix");
    }

    std::vector<StorageCandidate> out;
    const SymMatrix midpoint = SymMatrix((pbar_s.matrix() + p_s.matrix()) * -0.5);
    for (const SymMatrix& lam : {midpoint, SymMatrix(-pbar_s)}) {
        StorageMatrix cand{lam};
        out.push_back({cand, check_predissipativity(prob.cost, prob.sys, cand, tol.pd_tol)});
    }
    return out;
}

}  // namespace rhlq::model

namespace rhlq::riccati {

/// Resolves a strict certificate: Lambda = 0 when the stage cost is already
/// positive definite, otherwise the first strict suggestion candidate.
inline std::optional<StorageMatrix> find_certificate(const LqProblem& prob,
                                                     const Tolerances& tol) {
    const StorageMatrix zero{SymMatrix::zeros(prob.n_x())};
    if (model::check_predissipativity(prob.cost, prob.sys, zero, tol.pd_tol).verdict ==
        model::DissipativityVerdict::Strict)
        return zero;
    try {
        for (const auto& cand : model::suggest_storage(prob, tol))
            if (cand.report.verdict == model::DissipativityVerdict::Strict) return cand.storage;
    } catch (const Error&) {
        return std::nullopt;
    }
    return std::nullopt;
}

}  // namespace rhlq::riccati
