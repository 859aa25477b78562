#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "rhlq/riccati.hpp"

namespace rhlq::design {

using la::Matrix;
using la::SymMatrix;
using model::LqProblem;
using model::StorageMatrix;

/// Terminal cost built as base + E with E positive definite; the base is the
/// stabilizing RDARE solution, which coincides with the antistabilizing DARE
/// solution whenever that one exists.
struct TerminalDesign {
    SymMatrix Pf;
    enum class Basis { Antistabilizing, RdareStabilizing } basis;
    SymMatrix E;
    double margin;  // lambda_min(E)
    // lambda_min(E) at or below this threshold has no covering statement in
    // the theory; flagged as advisory only
    bool boundary_warning;
};

inline const char* to_string(TerminalDesign::Basis b) {
    return b == TerminalDesign::Basis::Antistabilizing ? "antistabilizing" : "rdare_stabilizing";
}

inline TerminalDesign design_terminal(const LqProblem& prob, const SymMatrix& e,
                                      std::optional<StorageMatrix> storage = {},
                                      const Tolerances& tol = {}) {
    if (la::definiteness(e, tol.pd_tol) != la::Definiteness::PositiveDefinite)
        throw NotPositiveDefinite("terminal perturbation E must be positive definite");
    const riccati::RdareSolution rd = riccati::solve_rdare_stabilizing(prob, storage, tol);
    const SymMatrix pf = SymMatrix(rd.Pbar.matrix() + e.matrix());
    const double margin = la::min_eigenvalue(e);
    const bool boundary = margin <= 1e-6 * std::max(1.0, e.frobenius_norm());
    const auto basis = riccati::antistab_existence_test(prob, tol).exists
                           ? TerminalDesign::Basis::Antistabilizing
                           : TerminalDesign::Basis::RdareStabilizing;
    return TerminalDesign{pf, basis, e, margin, boundary};
}

struct HorizonRecord {
    std::size_t N;
    double spectral_radius;  // of A - B K_N
};

struct HorizonReport {
    std::vector<HorizonRecord> records;  // contiguous from N = 1
    std::optional<std::size_t> min_stabilizing_N;
    std::size_t N_max = 0;
    // first N whose Riccati step met a singular inner matrix; the recursion
    // cannot proceed past it, so records stop there
    std::optional<std::size_t> failed_at;
};

/// Sweeps the recursion from P_0 = Pf and reports the spectral radius of
/// A - B K_N per horizon; min_stabilizing_N is the smallest N with
/// spectral_radius < 1 - margin, or absent when none occurs within N_max
/// (a legitimate outcome, e.g. for Pf = P_a).
inline HorizonReport min_stabilizing_horizon(const LqProblem& prob, const SymMatrix& pf,
                                             std::size_t n_max = 200, double margin = 1e-9,
                                             const Tolerances& tol = {}) {
    if (n_max == 0) throw DimensionError("N_max must be at least 1");
    HorizonReport report;
    report.N_max = n_max;
    SymMatrix p = pf;
    const LqProblem swept(prob.sys, prob.cost, model::TerminalCost{pf});
    for (std::size_t n = 1; n <= n_max; ++n) {
        try {
            auto [p_next, k] = riccati::riccati_step(p, swept, tol);
            const double rho = la::eigenvalues(prob.sys.A - prob.sys.B * k).spectral_radius;
            report.records.push_back({n, rho});
            if (!report.min_stabilizing_N && rho < 1.0 - margin) report.min_stabilizing_N = n;
            p = std::move(p_next);
        } catch (const SingularInnerMatrix&) {
            report.failed_at = n;
            break;
        }
    }
    return report;
}

/// Spectral radii of A - B K_N for N = 1..N_max; plain data for plotting.
inline std::vector<double> closed_loop_eigs_vs_N(const LqProblem& prob, const SymMatrix& pf,
                                                 std::size_t n_max, const Tolerances& tol = {}) {
    const HorizonReport report = min_stabilizing_horizon(prob, pf, n_max, tol.schur_margin, tol);
    if (report.failed_at)
        throw SingularInnerMatrix("Riccati step became singular during the sweep");
    std::vector<double> radii;
    radii.reserve(report.records.size());
    for (const auto& rec : report.records) radii.push_back(rec.spectral_radius);
    return radii;
}

struct LyapunovCertificate {
    bool certified;
    double decrease_margin;  // lambda_min of Q_{lambda,K_N} - A_K'(P_{l,N}-P_{l,N-1})A_K
    double pd_margin;        // lambda_min of P_{lambda,N}
    double witness;          // min of the two
};

/// Finite-horizon Lyapunov decrease test on the rotated problem: certified
/// iff the rotated closed-loop stage cost dominates the iterate increment and
/// the rotated cost-to-go matrix is positive definite. Stricter than the
/// plain spectral-radius test.
inline LyapunovCertificate lyapunov_decrease_check(const LqProblem& prob,
                                                   const StorageMatrix& storage, std::size_t n,
                                                   const Tolerances& tol = {}) {
    if (n == 0) throw DimensionError("horizon must be at least 1");
    if (model::check_predissipativity(prob.cost, prob.sys, storage, tol.pd_tol).verdict !=
        model::DissipativityVerdict::Strict)
        throw NoCertificate("lyapunov check requires a strict storage certificate");
    const riccati::RiccatiTrajectory traj = riccati::iterate(prob, n, tol);
    const Matrix k_n = traj.K_seq.back();
    // rotated iterates are the original ones shifted by Lambda
    const SymMatrix p_rot_n =
        SymMatrix(traj.P_seq[n].matrix() + storage.Lambda.matrix());
    const SymMatrix increment =
        SymMatrix(traj.P_seq[n].matrix() - traj.P_seq[n - 1].matrix());
    const LqProblem pre = model::prestabilize(prob, k_n);
    const SymMatrix q_rot_k = model::rotate_cost(pre.cost, pre.sys, storage).Q;
    const Matrix a_k = pre.sys.A;
    const SymMatrix decrease =
        SymMatrix(q_rot_k.matrix() - la::sandwich(a_k, increment).matrix());
    const double decrease_margin = la::min_eigenvalue(decrease);
    const double pd_margin = la::min_eigenvalue(p_rot_n);
    const bool certified =
        decrease_margin > 0.0 &&
        la::definiteness(p_rot_n, tol.pd_tol) == la::Definiteness::PositiveDefinite;
    return LyapunovCertificate{certified, decrease_margin, pd_margin,
                               std::min(decrease_margin, pd_margin)};
}

}  // namespace rhlq::design
