#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "rhlq/matrix.hpp"

namespace rhlq::la {

/// Eigenvalues of a square matrix plus the derived spectral radius.
struct Spectrum {
    std::vector<std::complex<double>> eigenvalues;
    double spectral_radius = 0.0;
};

enum class Definiteness {
    PositiveDefinite,
    PositiveSemidefinite,
    Indefinite,
    NegativeDefinite,
    NegativeSemidefinite,
};

inline const char* to_string(Definiteness d) {
    switch (d) {
        case Definiteness::PositiveDefinite: return "positive_definite";
        case Definiteness::PositiveSemidefinite: return "positive_semidefinite";
        case Definiteness::Indefinite: return "indefinite";
        case Definiteness::NegativeDefinite: return "negative_definite";
        case Definiteness::NegativeSemidefinite: return "negative_semidefinite";
    }
    return "?";
}

namespace detail {

/// Householder similarity reduction to upper Hessenberg form (in place).
inline void to_hessenberg(Matrix& a) {
    const std::size_t n = a.rows();
    if (n < 3) return;
    std::vector<double> v;
    for (std::size_t k = 0; k + 2 < n; ++k) {
        double alpha = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) alpha += a(i, k) * a(i, k);
        alpha = std::sqrt(alpha);
        if (alpha == 0.0) continue;
        v.assign(n - k - 1, 0.0);
        for (std::size_t i = k + 1; i < n; ++i) v[i - k - 1] = a(i, k);
        v[0] += (v[0] >= 0.0 ? alpha : -alpha);
        double vnorm2 = 0.0;
        for (double x : v) vnorm2 += x * x;
        if (vnorm2 == 0.0) continue;
        const double beta = 2.0 / vnorm2;
        // left: A <- (I - beta v v') A on rows k+1..n-1
        for (std::size_t j = 0; j < n; ++j) {
            double proj = 0.0;
            for (std::size_t i = k + 1; i < n; ++i) proj += v[i - k - 1] * a(i, j);
            proj *= beta;
            for (std::size_t i = k + 1; i < n; ++i) a(i, j) -= proj * v[i - k - 1];
        }
        // right: A <- A (I - beta v v') on cols k+1..n-1
        for (std::size_t i = 0; i < n; ++i) {
            double proj = 0.0;
            for (std::size_t j = k + 1; j < n; ++j) proj += a(i, j) * v[j - k - 1];
            proj *= beta;
            for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= proj * v[j - k - 1];
        }
        for (std::size_t i = k + 2; i < n; ++i) a(i, k) = 0.0;
    }
}

/// Francis implicit double-shift QR on an upper Hessenberg matrix;
/// eigenvalues only. Classic hqr scheme with deflation at small
/// subdiagonals and exceptional shifts every 10 stalled iterations.
inline std::vector<std::complex<double>> hessenberg_eigenvalues(Matrix a) {
    const int n = static_cast<int>(a.rows());
    std::vector<std::complex<double>> eig(static_cast<std::size_t>(n));
    const double eps = std::numeric_limits<double>::epsilon();

    double anorm = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = std::max(i - 1, 0); j < n; ++j) anorm += std::abs(a(i, j));
    if (anorm == 0.0) return eig;  // zero matrix

    int nn = n - 1;
    double t = 0.0;
    while (nn >= 0) {
        int its = 0;
        int l = 0;
        do {
            for (l = nn; l >= 1; --l) {
                double s = std::abs(a(l - 1, l - 1)) + std::abs(a(l, l));
                if (s == 0.0) s = anorm;
                if (std::abs(a(l, l - 1)) <= eps * s) {
                    a(l, l - 1) = 0.0;
                    break;
                }
            }
            if (l < 0) l = 0;
            double x = a(nn, nn);
            if (l == nn) {
                eig[static_cast<std::size_t>(nn)] = {x + t, 0.0};
                --nn;
            } else {
                double y = a(nn - 1, nn - 1);
                double w = a(nn, nn - 1) * a(nn - 1, nn);
                if (l == nn - 1) {
                    double p = 0.5 * (y - x);
                    double q = p * p + w;
                    double z = std::sqrt(std::abs(q));
                    x += t;
                    if (q >= 0.0) {
                        z = p + std::copysign(z, p);
                        eig[static_cast<std::size_t>(nn - 1)] = {x + z, 0.0};
                        eig[static_cast<std::size_t>(nn)] =
                            (z != 0.0) ? std::complex<double>{x - w / z, 0.0}
                                       : std::complex<double>{x + z, 0.0};
                    } else {
                        eig[static_cast<std::size_t>(nn - 1)] = {x + p, -z};
                        eig[static_cast<std::size_t>(nn)] = {x + p, z};
                    }
                    nn -= 2;
                } else {
                    if (its == 30)
                        throw EigenNonConvergence("QR eigenvalue iteration exceeded its budget");
                    if (its == 10 || its == 20) {
                        t += x;
                        for (int i = 0; i <= nn; ++i) a(i, i) -= x;
                        const double s = std::abs(a(nn, nn - 1)) + std::abs(a(nn - 1, nn - 2));
                        y = x = 0.75 * s;
                        w = -0.4375 * s * s;
                    }
                    ++its;
                    int m = 0;
                    double p = 0.0, q = 0.0, r = 0.0, z = 0.0;
                    for (m = nn - 2; m >= l; --m) {
                        z = a(m, m);
                        const double rr = x - z;
                        const double ss = y - z;
                        p = (rr * ss - w) / a(m + 1, m) + a(m, m + 1);
                        q = a(m + 1, m + 1) - z - rr - ss;
                        r = a(m + 2, m + 1);
                        const double scale = std::abs(p) + std::abs(q) + std::abs(r);
                        p /= scale;
                        q /= scale;
                        r /= scale;
                        if (m == l) break;
                        const double u = std::abs(a(m, m - 1)) * (std::abs(q) + std::abs(r));
                        const double v = std::abs(p) * (std::abs(a(m - 1, m - 1)) + std::abs(z) +
                                                        std::abs(a(m + 1, m + 1)));
                        if (u <= eps * v) break;
                    }
                    for (int i = m + 2; i <= nn; ++i) {
                        a(i, i - 2) = 0.0;
                        if (i != m + 2) a(i, i - 3) = 0.0;
                    }
                    for (int k = m; k <= nn - 1; ++k) {
                        if (k != m) {
                            p = a(k, k - 1);
                            q = a(k + 1, k - 1);
                            r = (k != nn - 1) ? a(k + 2, k - 1) : 0.0;
                            x = std::abs(p) + std::abs(q) + std::abs(r);
                            if (x != 0.0) {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        const double s = std::copysign(std::sqrt(p * p + q * q + r * r), p);
                        if (s == 0.0) continue;
                        if (k == m) {
                            if (l != m) a(k, k - 1) = -a(k, k - 1);
                        } else {
                            a(k, k - 1) = -s * x;
                        }
                        p += s;
                        x = p / s;
                        y = q / s;
                        z = r / s;
                        q /= p;
                        r /= p;
                        for (int j = k; j <= nn; ++j) {
                            double pp = a(k, j) + q * a(k + 1, j);
                            if (k != nn - 1) {
                                pp += r * a(k + 2, j);
                                a(k + 2, j) -= pp * z;
                            }
                            a(k + 1, j) -= pp * y;
                            a(k, j) -= pp * x;
                        }
                        const int mmin = (nn < k + 3) ? nn : k + 3;
                        for (int i = l; i <= mmin; ++i) {
                            double pp = x * a(i, k) + y * a(i, k + 1);
                            if (k != nn - 1) {
                                pp += z * a(i, k + 2);
                                a(i, k + 2) -= pp * r;
                            }
                            a(i, k + 1) -= pp * q;
                            a(i, k) -= pp;
                        }
                    }
                }
            }
        } while (l < nn - 1);
    }
    return eig;
}

}  // namespace detail

/// Complex eigenvalues of a square real matrix; Hessenberg reduction plus
/// implicit-shift QR. Accuracy target 1e-10 * max(1, ||m||_F) up to the
/// documented kernel cap of dimension 50.
inline Spectrum eigenvalues(const Matrix& m) {
    if (!m.square()) throw DimensionError("eigenvalues of non-square matrix");
    m.check_finite();
    Matrix h = m;
    detail::to_hessenberg(h);
    Spectrum sp;
    sp.eigenvalues = detail::hessenberg_eigenvalues(std::move(h));
    std::sort(sp.eigenvalues.begin(), sp.eigenvalues.end(),
              [](const std::complex<double>& a, const std::complex<double>& b) {
                  if (a.real() != b.real()) return a.real() < b.real();
                  return a.imag() < b.imag();
              });
    for (const auto& ev : sp.eigenvalues) sp.spectral_radius = std::max(sp.spectral_radius, std::abs(ev));
    return sp;
}

inline double spectral_radius(const Matrix& m) { return eigenvalues(m).spectral_radius; }

/// True iff every eigenvalue satisfies |mu| < 1 - margin.
inline bool is_schur_stable(const Matrix& m, double margin = 1e-9) {
    const Spectrum sp = eigenvalues(m);
    for (const auto& ev : sp.eigenvalues)
        if (std::abs(ev) >= 1.0 - margin) return false;
    return true;
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi sweeps, ascending.
inline std::vector<double> symmetric_eigenvalues(const SymMatrix& m) {
    Matrix a = m.matrix();
    const std::size_t n = a.rows();
    const double scale = std::max(1.0, a.frobenius_norm());
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (std::sqrt(off) <= 1e-15 * scale) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double tt = (theta >= 0.0 ? 1.0 : -1.0) /
                                  (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(tt * tt + 1.0);
                const double s = tt * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> evs(n);
    for (std::size_t i = 0; i < n; ++i) evs[i] = a(i, i);
    std::sort(evs.begin(), evs.end());
    return evs;
}

inline double min_eigenvalue(const SymMatrix& m) { return symmetric_eigenvalues(m).front(); }
inline double max_eigenvalue(const SymMatrix& m) { return symmetric_eigenvalues(m).back(); }

/// Classification against the threshold tol * max(1, ||m||_F) on the
/// symmetric spectrum.
inline Definiteness definiteness(const SymMatrix& m, double tol = 1e-9) {
    if (tol < 0.0) throw DimensionError("definiteness tolerance must be nonnegative");
    const auto evs = symmetric_eigenvalues(m);
    const double thr = tol * std::max(1.0, m.frobenius_norm());
    const double lmin = evs.front();
    const double lmax = evs.back();
    if (lmin > thr) return Definiteness::PositiveDefinite;
    if (lmax < -thr) return Definiteness::NegativeDefinite;
    if (lmin >= -thr) return Definiteness::PositiveSemidefinite;
    if (lmax <= thr) return Definiteness::NegativeSemidefinite;
    return Definiteness::Indefinite;
}

}  // namespace rhlq::la
