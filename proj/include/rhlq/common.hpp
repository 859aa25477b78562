#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace rhlq {

/// Base class for all recoverable library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Shape or size mismatch between operands.
struct DimensionError : Error {
    using Error::Error;
};

/// NaN or Inf encountered where finite values are required.
struct NonFiniteError : Error {
    using Error::Error;
};

/// A linear solve met a pivot below the singularity threshold. Callers may
/// translate this into a domain condition (e.g. nonexistence of the
/// antistabilizing Riccati solution) instead of treating it as fatal.
struct SingularMatrix : Error {
    using Error::Error;
};

/// QR eigenvalue iteration exhausted its budget.
struct EigenNonConvergence : Error {
    using Error::Error;
};

/// The inner matrix R + B'PB of a Riccati step is singular to tolerance.
struct SingularInnerMatrix : Error {
    using Error::Error;
};

/// Fixed-point Riccati iteration exhausted its budget.
struct NonConvergence : Error {
    using Error::Error;
};

/// No strict storage certificate was supplied and none could be found.
struct NoCertificate : Error {
    using Error::Error;
};

struct NotControllable : Error {
    using Error::Error;
};

struct NotStabilizable : Error {
    using Error::Error;
};

/// QP has no feasible point (phase-1 failure).
struct QpInfeasible : Error {
    using Error::Error;
};

struct QpMaxIterations : Error {
    using Error::Error;
};

/// Working set became numerically rank deficient.
struct QpDegenerate : Error {
    using Error::Error;
};

struct NotPositiveDefinite : Error {
    using Error::Error;
};

/// Malformed configuration input (CLI layer).
struct ConfigError : Error {
    using Error::Error;
};

/// Single knob set for every numeric threshold in the library. All
/// definiteness and stability thresholds scale with max(1, ||.||_F) of the
/// matrix under test.
struct Tolerances {
    double pd_tol = 1e-9;             // definiteness classification
    double schur_margin = 1e-9;       // strict |mu| < 1 margin
    double riccati_rel_tol = 1e-13;   // fixed-point stopping rule
    std::size_t riccati_max_iter = 10000;
    double singular_tol = 1e-12;      // pivot / inner-matrix singularity
    double rank_tol = 1e-9;           // controllability rank decisions
    double residual_tol = 1e-8;       // accepted DARE residual scale
    double antistab_det_tol = 1e-9;   // existence-test determinant threshold
};

/// Deterministic 64-bit generator (splitmix64). Used everywhere randomness
/// is needed so that results are reproducible from a seed alone, independent
/// of standard-library distribution internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n).
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(next_u64() % n); }

private:
    std::uint64_t state_;
};

}  // namespace rhlq
