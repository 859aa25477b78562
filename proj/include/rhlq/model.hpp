#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "rhlq/eigen.hpp"
#include "rhlq/matrix.hpp"

namespace rhlq::model {

using la::Matrix;
using la::SymMatrix;
using la::Vector;

/// x_{k+1} = A x_k + B u_k.
struct LinearSystem {
    Matrix A;  // n_x x n_x
    Matrix B;  // n_x x n_u

    LinearSystem(Matrix a, Matrix b) : A(std::move(a)), B(std::move(b)) {
        if (!A.square()) throw DimensionError("state map must be square");
        if (B.rows() != A.rows()) throw DimensionError("input map row count mismatch");
        A.check_finite();
        B.check_finite();
    }

    std::size_t n_x() const { return A.rows(); }
    std::size_t n_u() const { return B.cols(); }
};

/// Stage cost l(x,u) = [x;u]' [[Q, S'],[S, R]] [x;u].
struct StageCost {
    SymMatrix Q;  // n_x
    Matrix S;     // n_u x n_x
    SymMatrix R;  // n_u

    StageCost(SymMatrix q, Matrix s, SymMatrix r)
        : Q(std::move(q)), S(std::move(s)), R(std::move(r)) {
        if (S.rows() != R.dim() || S.cols() != Q.dim())
            throw DimensionError("cross term shape mismatch");
        S.check_finite();
    }

    std::size_t n_x() const { return Q.dim(); }
    std::size_t n_u() const { return R.dim(); }

    /// Assembles the full (n_x+n_u) stage-cost matrix.
    SymMatrix assemble() const {
        Matrix h(n_x() + n_u(), n_x() + n_u());
        h.set_block(0, 0, Q.matrix());
        h.set_block(0, n_x(), S.transpose());
        h.set_block(n_x(), 0, S);
        h.set_block(n_x(), n_x(), R.matrix());
        return SymMatrix(h);
    }
};

struct TerminalCost {
    SymMatrix Pf;
};

/// Storage matrix for the quadratic storage function lambda(x) = x' Lambda x.
/// Certifies strict (x,u)-pre-dissipativity only when the check passes.
struct StorageMatrix {
    SymMatrix Lambda;
};

struct LqProblem {
    LinearSystem sys;
    StageCost cost;
    TerminalCost terminal;

    LqProblem(LinearSystem s, StageCost c, TerminalCost t)
        : sys(std::move(s)), cost(std::move(c)), terminal(std::move(t)) {
        if (cost.n_x() != sys.n_x() || cost.n_u() != sys.n_u())
            throw DimensionError("cost dimensions do not match the system");
        if (terminal.Pf.dim() != sys.n_x())
            throw DimensionError("terminal cost dimension mismatch");
    }

    std::size_t n_x() const { return sys.n_x(); }
    std::size_t n_u() const { return sys.n_u(); }
};

/// Componentwise affine path constraints C x + D u + e <= 0. The offset e
/// extends the homogeneous form so that box constraints like |x| <= 1 are
/// expressible.
struct AffineConstraintSet {
    Matrix C;  // l x n_x
    Matrix D;  // l x n_u
    Vector e;  // length l

    AffineConstraintSet(Matrix c, Matrix d, Vector offs)
        : C(std::move(c)), D(std::move(d)), e(std::move(offs)) {
        if (D.rows() != C.rows() || e.size() != C.rows())
            throw DimensionError("constraint row counts disagree");
    }

    std::size_t rows() const { return C.rows(); }
};

/// Rotated stage cost H_Lambda with blocks Q + L - A'LA, S' - A'LB, R - B'LB.
inline StageCost rotate_cost(const StageCost& cost, const LinearSystem& sys,
                             const StorageMatrix& storage) {
    const Matrix& a = sys.A;
    const Matrix& b = sys.B;
    const Matrix& l = storage.Lambda.matrix();
    if (storage.Lambda.dim() != sys.n_x()) throw DimensionError("storage dimension mismatch");
    const SymMatrix q_rot =
        SymMatrix(cost.Q.matrix() + l - la::sandwich(a, storage.Lambda).matrix());
    const Matrix s_rot = cost.S - b.transpose() * l * a;
    const SymMatrix r_rot = SymMatrix(cost.R.matrix() - la::sandwich(b, storage.Lambda).matrix());
    return StageCost(q_rot, s_rot, r_rot);
}

enum class DissipativityVerdict { Strict, Semidefinite, Fails };

inline const char* to_string(DissipativityVerdict v) {
    switch (v) {
        case DissipativityVerdict::Strict: return "strict";
        case DissipativityVerdict::Semidefinite: return "semidefinite";
        case DissipativityVerdict::Fails: return "fails";
    }
    return "?";
}

struct DissipativityReport {
    DissipativityVerdict verdict;
    double min_eigenvalue;  // lambda_min of H_Lambda, the certified epsilon when strict
};

/// Quadratic strict (x,u)-pre-dissipativity check: strict iff H_Lambda is
/// positive definite at the given tolerance.
inline DissipativityReport check_predissipativity(const StageCost& cost, const LinearSystem& sys,
                                                  const StorageMatrix& storage,
                                                  double tol = 1e-9) {
    const SymMatrix h = rotate_cost(cost, sys, storage).assemble();
    const double lmin = la::min_eigenvalue(h);
    switch (la::definiteness(h, tol)) {
        case la::Definiteness::PositiveDefinite:
            return {DissipativityVerdict::Strict, lmin};
        case la::Definiteness::PositiveSemidefinite:
            return {DissipativityVerdict::Semidefinite, lmin};
        default:
            return {DissipativityVerdict::Fails, lmin};
    }
}

/// Input substitution u = ubar - Khat x: system becomes (A - B Khat, B) and
/// the cost blocks become Q_Khat = Q - S'Khat - Khat'S + Khat'R Khat,
/// S_Khat = S - R Khat. The terminal cost is unchanged.
inline LqProblem prestabilize(const LqProblem& p, const Matrix& khat) {
    if (khat.rows() != p.n_u() || khat.cols() != p.n_x())
        throw DimensionError("prestabilizer shape mismatch");
    const Matrix a_k = p.sys.A - p.sys.B * khat;
    const Matrix sk_t = p.cost.S.transpose() * khat;  // S' Khat, n_x x n_x
    const SymMatrix q_k = SymMatrix(p.cost.Q.matrix() - sk_t - sk_t.transpose() +
                                    la::sandwich(khat, p.cost.R).matrix());
    const Matrix s_k = p.cost.S - p.cost.R.matrix() * khat;
    return LqProblem(LinearSystem(a_k, p.sys.B), StageCost(q_k, s_k, p.cost.R), p.terminal);
}

/// M_Khat = [[I, 0], [-Khat, I]]; satisfies M' H_Lambda M = H_{Khat,Lambda}.
inline Matrix congruence_matrix(const Matrix& khat) {
    const std::size_t n_x = khat.cols();
    const std::size_t n_u = khat.rows();
    Matrix m = Matrix::identity(n_x + n_u);
    m.set_block(n_x, 0, -khat);
    return m;
}

/// Relative Frobenius defect of M_Khat' H_Lambda M_Khat = H_{Khat,Lambda}.
inline double congruence_residual(const StageCost& cost, const LinearSystem& sys,
                                  const StorageMatrix& storage, const Matrix& khat) {
    const SymMatrix h_rot = rotate_cost(cost, sys, storage).assemble();
    const Matrix m = congruence_matrix(khat);
    const Matrix lhs = m.transpose() * h_rot.matrix() * m;
    const LqProblem tmp(LinearSystem(sys.A, sys.B), cost,
                        TerminalCost{SymMatrix::zeros(sys.n_x())});
    const LqProblem pre = prestabilize(tmp, khat);
    const Matrix rhs = rotate_cost(pre.cost, pre.sys, storage).assemble().matrix();
    return (lhs - rhs).frobenius_norm() / std::max(1.0, rhs.frobenius_norm());
}

/// Kalman controllability matrix [B, AB, ..., A^{n_x-1}B], with each block
/// downscaled by max(1, ||A^k B||_F) to keep the rank decision conditioned.
inline Matrix kalman_matrix(const LinearSystem& sys) {
    const std::size_t n = sys.n_x();
    const std::size_t m = sys.n_u();
    Matrix k(n, n * m);
    Matrix block = sys.B;
    for (std::size_t j = 0; j < n; ++j) {
        const double scale = 1.0 / std::max(1.0, block.frobenius_norm());
        k.set_block(0, j * m, block * scale);
        if (j + 1 < n) block = sys.A * block;
    }
    return k;
}

namespace detail {

/// Singular values by one-sided Jacobi (Hestenes), descending. Accurate for
/// small singular values, unlike going through the Gram matrix.
inline std::vector<double> singular_values(Matrix u) {
    const std::size_t rows = u.rows();
    const std::size_t cols = u.cols();
    for (int sweep = 0; sweep < 60; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p < cols; ++p) {
            for (std::size_t q = p + 1; q < cols; ++q) {
                double app = 0.0, aqq = 0.0, apq = 0.0;
                for (std::size_t i = 0; i < rows; ++i) {
                    app += u(i, p) * u(i, p);
                    aqq += u(i, q) * u(i, q);
                    apq += u(i, p) * u(i, q);
                }
                if (std::abs(apq) <= 1e-15 * std::sqrt(app * aqq) || apq == 0.0) continue;
                rotated = true;
                const double zeta = (aqq - app) / (2.0 * apq);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < rows; ++i) {
                    const double uip = u(i, p);
                    const double uiq = u(i, q);
                    u(i, p) = c * uip - s * uiq;
                    u(i, q) = s * uip + c * uiq;
                }
            }
        }
        if (!rotated) break;
    }
    std::vector<double> sigma(cols, 0.0);
    for (std::size_t j = 0; j < cols; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < rows; ++i) acc += u(i, j) * u(i, j);
        sigma[j] = std::sqrt(acc);
    }
    std::sort(sigma.begin(), sigma.end(), std::greater<>());
    return sigma;
}

}  // namespace detail

/// Rank of the Kalman matrix from its singular values, relative threshold
/// 1e-9 (the single knob for controllability decisions).
inline std::size_t controllability_rank(const LinearSystem& sys, double rank_tol = 1e-9) {
    const auto sigma = detail::singular_values(kalman_matrix(sys));
    if (sigma.empty() || sigma.front() == 0.0) return 0;
    std::size_t r = 0;
    for (double s : sigma)
        if (s > rank_tol * sigma.front()) ++r;
    return std::min<std::size_t>(r, sys.n_x());
}

inline bool is_controllable(const LinearSystem& sys, double rank_tol = 1e-9) {
    return controllability_rank(sys, rank_tol) == sys.n_x();
}

/// Orthogonal change of basis with the controllable block leading:
/// basis' A basis = [[A11, A12], [0, A22]], basis' B = [B1; 0], with
/// (A11, B1) controllable.
struct StaircaseDecomposition {
    Matrix basis;        // orthogonal, n_x x n_x
    std::size_t n_ctrl;  // dimension of the controllable block
    Matrix A_t;          // transformed state map
    Matrix B_t;          // transformed input map

    Matrix A11() const { return A_t.block(0, 0, n_ctrl, n_ctrl); }
    Matrix A22() const {
        const std::size_t n = A_t.rows();
        return A_t.block(n_ctrl, n_ctrl, n - n_ctrl, n - n_ctrl);
    }
    Matrix B1() const { return B_t.block(0, 0, n_ctrl, B_t.cols()); }
};

inline StaircaseDecomposition staircase(const LinearSystem& sys, double rank_tol = 1e-9) {
    const std::size_t n = sys.n_x();
    const std::size_t r = controllability_rank(sys, rank_tol);
    // The leading columns of the pivoted-QR factor span the column space of
    // the Kalman matrix, i.e. the controllable subspace; it is A-invariant
    // and contains range(B), so the transformed pair is block triangular.
    const la::QrPivot f = la::qr_column_pivot(kalman_matrix(sys), rank_tol);
    StaircaseDecomposition d{f.q, r, Matrix(n, n), sys.B};
    d.A_t = f.q.transpose() * sys.A * f.q;
    d.B_t = f.q.transpose() * sys.B;
    // zero the structurally vanishing blocks (they carry only rounding noise)
    for (std::size_t i = r; i < n; ++i) {
        for (std::size_t j = 0; j < r; ++j) d.A_t(i, j) = 0.0;
        for (std::size_t j = 0; j < sys.n_u(); ++j) d.B_t(i, j) = 0.0;
    }
    return d;
}

/// Stabilizable iff the uncontrollable block A22 is Schur stable.
inline bool is_stabilizable(const LinearSystem& sys, double rank_tol = 1e-9) {
    const StaircaseDecomposition d = staircase(sys, rank_tol);
    if (d.n_ctrl == sys.n_x()) return true;
    return la::is_schur_stable(d.A22(), 0.0);
}

/// Finds Khat with A - B Khat invertible; |det| must clear
/// 1e-9 * max(1, ||A - B Khat||_F). Deterministic given the seed; at most
/// 100 draws (controllable pairs admit such a Khat).
inline Matrix make_invertible_prestabilizer(const LinearSystem& sys, std::uint64_t seed = 1) {
    auto acceptable = [](const Matrix& m) {
        return std::abs(la::determinant(m)) > 1e-9 * std::max(1.0, m.frobenius_norm());
    };
    Matrix khat(sys.n_u(), sys.n_x());
    if (acceptable(sys.A)) return khat;  // zero feedback
    Rng rng(seed);
    for (int attempt = 0; attempt < 100; ++attempt) {
        for (std::size_t i = 0; i < khat.rows(); ++i)
            for (std::size_t j = 0; j < khat.cols(); ++j) khat(i, j) = rng.uniform(-1.0, 1.0);
        if (acceptable(sys.A - sys.B * khat)) return khat;
    }
    throw Error("no invertibility-restoring prestabilizer found within 100 draws");
}

struct GeneratedInstance {
    LqProblem problem;
    StorageMatrix storage;
};

/// Deterministic test-corpus generator: draws a positive definite core cost
/// and a storage matrix, then un-rotates so the emitted stage cost is
/// pre-dissipative by construction (and frequently indefinite). The state
/// map starts from a companion form, which makes (A, B) controllable, and is
/// hidden behind a random orthogonal similarity.
inline GeneratedInstance generate_predissipative_instance(std::uint64_t seed, std::size_t n_x,
                                                          std::size_t n_u) {
    if (n_x == 0 || n_u == 0 || n_x > 8 || n_u > 8)
        throw DimensionError("generator sizes must lie in 1..8");
    Rng rng(seed * 0x9e3779b97f4a7c15ULL + 0x100 * n_x + n_u);

    Matrix a(n_x, n_x);
    for (std::size_t i = 0; i + 1 < n_x; ++i) a(i, i + 1) = 1.0;
    for (std::size_t j = 0; j < n_x; ++j) a(n_x - 1, j) = rng.uniform(-1.5, 1.5);
    if (std::abs(a(n_x - 1, 0)) < 0.1) a(n_x - 1, 0) = a(n_x - 1, 0) >= 0.0 ? 0.1 : -0.1;

    Matrix b(n_x, n_u);
    b(n_x - 1, 0) = 1.0;  // (companion A, e_n) is controllable
    for (std::size_t i = 0; i < n_x; ++i)
        for (std::size_t j = 1; j < n_u; ++j) b(i, j) = rng.uniform(-1.0, 1.0);

    Matrix raw(n_x, n_x);
    for (std::size_t i = 0; i < n_x; ++i)
        for (std::size_t j = 0; j < n_x; ++j) raw(i, j) = rng.uniform(-1.0, 1.0);
    const Matrix t = la::qr_column_pivot(raw, 0.0).q;  // random orthogonal similarity
    const LinearSystem sys(t * a * t.transpose(), t * b);

    const std::size_t dim = n_x + n_u;
    Matrix g(dim, dim);
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j) g(i, j) = rng.uniform(-1.0, 1.0);
    const SymMatrix core = SymMatrix(
        la::symmetrize(g.transpose() * g).matrix() * (1.0 / static_cast<double>(dim)) +
        Matrix::identity(dim) * 0.3);

    Matrix lam_raw(n_x, n_x);
    for (std::size_t i = 0; i < n_x; ++i)
        for (std::size_t j = 0; j < n_x; ++j) lam_raw(i, j) = rng.uniform(-1.0, 1.0);
    const StorageMatrix storage{la::symmetrize(lam_raw) * rng.uniform(0.4, 1.6)};

    const StageCost core_cost(SymMatrix(core.matrix().block(0, 0, n_x, n_x)),
                              core.matrix().block(n_x, 0, n_u, n_x),
                              SymMatrix(core.matrix().block(n_x, n_x, n_u, n_u)));
    // un-rotate: rotating the result with +Lambda recovers the PD core
    const StageCost cost = rotate_cost(core_cost, sys, StorageMatrix{-storage.Lambda});

    return GeneratedInstance{LqProblem(sys, cost, TerminalCost{SymMatrix::zeros(n_x)}), storage};
}

}  // namespace rhlq::model
