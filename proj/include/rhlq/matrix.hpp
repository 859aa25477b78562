#pragma once

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "rhlq/common.hpp"

namespace rhlq::la {

/// Dense real matrix, row-major storage. Sized for desk-scale control
/// problems (documented kernel cap: dimension 50); entries must stay finite.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {
        if (rows == 0 || cols == 0) throw DimensionError("matrix dimensions must be positive");
    }

    Matrix(std::initializer_list<std::initializer_list<double>> init) {
        rows_ = init.size();
        cols_ = rows_ ? init.begin()->size() : 0;
        if (rows_ == 0 || cols_ == 0) throw DimensionError("matrix dimensions must be positive");
        data_.reserve(rows_ * cols_);
        for (const auto& row : init) {
            if (row.size() != cols_) throw DimensionError("ragged initializer");
            for (double v : row) data_.push_back(v);
        }
        check_finite();
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool square() const { return rows_ == cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    const std::vector<double>& data() const { return data_; }

    Matrix transpose() const {
        Matrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    Matrix operator+(const Matrix& o) const {
        require_same_shape(o);
        Matrix r = *this;
        for (std::size_t k = 0; k < data_.size(); ++k) r.data_[k] += o.data_[k];
        return r;
    }

    Matrix operator-(const Matrix& o) const {
        require_same_shape(o);
        Matrix r = *this;
        for (std::size_t k = 0; k < data_.size(); ++k) r.data_[k] -= o.data_[k];
        return r;
    }

    Matrix operator-() const {
        Matrix r = *this;
        for (double& v : r.data_) v = -v;
        return r;
    }

    Matrix operator*(const Matrix& o) const {
        if (cols_ != o.rows_) throw DimensionError("matrix product shape mismatch");
        Matrix r(rows_, o.cols_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t k = 0; k < cols_; ++k) {
                const double aik = (*this)(i, k);
                if (aik == 0.0) continue;
                for (std::size_t j = 0; j < o.cols_; ++j) r(i, j) += aik * o(k, j);
            }
        return r;
    }

    Matrix operator*(double s) const {
        Matrix r = *this;
        for (double& v : r.data_) v *= s;
        return r;
    }

    double frobenius_norm() const {
        double acc = 0.0;
        for (double v : data_) acc += v * v;
        return std::sqrt(acc);
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::abs(v));
        return m;
    }

    double trace() const {
        if (!square()) throw DimensionError("trace of non-square matrix");
        double t = 0.0;
        for (std::size_t i = 0; i < rows_; ++i) t += (*this)(i, i);
        return t;
    }

    /// Copies block [r0, r0+nr) x [c0, c0+nc).
    Matrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
        if (r0 + nr > rows_ || c0 + nc > cols_) throw DimensionError("block out of range");
        Matrix b(nr, nc);
        for (std::size_t i = 0; i < nr; ++i)
            for (std::size_t j = 0; j < nc; ++j) b(i, j) = (*this)(r0 + i, c0 + j);
        return b;
    }

    void set_block(std::size_t r0, std::size_t c0, const Matrix& b) {
        if (r0 + b.rows_ > rows_ || c0 + b.cols_ > cols_) throw DimensionError("block out of range");
        for (std::size_t i = 0; i < b.rows_; ++i)
            for (std::size_t j = 0; j < b.cols_; ++j) (*this)(r0 + i, c0 + j) = b(i, j);
    }

    bool operator==(const Matrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
    }

    void check_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) throw NonFiniteError("non-finite matrix entry");
    }

private:
    void require_same_shape(const Matrix& o) const {
        if (rows_ != o.rows_ || cols_ != o.cols_) throw DimensionError("shape mismatch");
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline Matrix operator*(double s, const Matrix& m) { return m * s; }

/// Column vector.
class Vector {
public:
    Vector() = default;
    explicit Vector(std::size_t n) : data_(n, 0.0) {}
    Vector(std::initializer_list<double> init) : data_(init) {}
    explicit Vector(std::vector<double> values) : data_(std::move(values)) {}

    std::size_t size() const { return data_.size(); }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    const std::vector<double>& data() const { return data_; }

    Vector operator+(const Vector& o) const {
        require_same_size(o);
        Vector r = *this;
        for (std::size_t i = 0; i < size(); ++i) r[i] += o[i];
        return r;
    }

    Vector operator-(const Vector& o) const {
        require_same_size(o);
        Vector r = *this;
        for (std::size_t i = 0; i < size(); ++i) r[i] -= o[i];
        return r;
    }

    Vector operator-() const {
        Vector r = *this;
        for (double& v : r.data_) v = -v;
        return r;
    }

    Vector operator*(double s) const {
        Vector r = *this;
        for (double& v : r.data_) v *= s;
        return r;
    }

    double norm() const {
        double acc = 0.0;
        for (double v : data_) acc += v * v;
        return std::sqrt(acc);
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::abs(v));
        return m;
    }

    bool operator==(const Vector& o) const { return data_ == o.data_; }

private:
    void require_same_size(const Vector& o) const {
        if (size() != o.size()) throw DimensionError("vector size mismatch");
    }

    std::vector<double> data_;
};

inline Vector operator*(double s, const Vector& v) { return v * s; }

inline double dot(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw DimensionError("dot size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

inline Vector operator*(const Matrix& m, const Vector& v) {
    if (m.cols() != v.size()) throw DimensionError("matrix-vector shape mismatch");
    Vector r(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) acc += m(i, j) * v[j];
        r[i] = acc;
    }
    return r;
}

inline Matrix column_matrix(const Vector& v) {
    Matrix m(v.size(), 1);
    for (std::size_t i = 0; i < v.size(); ++i) m(i, 0) = v[i];
    return m;
}

inline Vector column_of(const Matrix& m, std::size_t j = 0) {
    Vector v(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) v[i] = m(i, j);
    return v;
}

/// Symmetric real matrix. Construction checks the symmetry defect against
/// 1e-12 * max(1, ||M||_F) and then stores the symmetrized (M + M')/2.
class SymMatrix {
public:
    SymMatrix() = default;

    explicit SymMatrix(const Matrix& m, double sym_tol = 1e-12) {
        if (!m.square()) throw DimensionError("symmetric matrix must be square");
        const double scale = std::max(1.0, m.frobenius_norm());
        double defect = 0.0;
        for (std::size_t i = 0; i < m.rows(); ++i)
            for (std::size_t j = i + 1; j < m.cols(); ++j)
                defect = std::max(defect, std::abs(m(i, j) - m(j, i)));
        if (defect > sym_tol * scale) throw DimensionError("matrix is not symmetric to tolerance");
        mat_ = m;
        for (std::size_t i = 0; i < m.rows(); ++i)
            for (std::size_t j = i + 1; j < m.cols(); ++j) {
                const double avg = 0.5 * (m(i, j) + m(j, i));
                mat_(i, j) = avg;
                mat_(j, i) = avg;
            }
        mat_.check_finite();
    }

    SymMatrix(std::initializer_list<std::initializer_list<double>> init)
        : SymMatrix(Matrix(init)) {}

    static SymMatrix identity(std::size_t n) { return SymMatrix(Matrix::identity(n)); }
    static SymMatrix zeros(std::size_t n) { return SymMatrix(Matrix(n, n)); }
    static SymMatrix scaled_identity(std::size_t n, double s) {
        return SymMatrix(Matrix::identity(n) * s);
    }

    std::size_t dim() const { return mat_.rows(); }
    bool empty() const { return mat_.empty(); }
    double operator()(std::size_t i, std::size_t j) const { return mat_(i, j); }
    const Matrix& matrix() const { return mat_; }

    SymMatrix operator+(const SymMatrix& o) const { return SymMatrix(mat_ + o.mat_); }
    SymMatrix operator-(const SymMatrix& o) const { return SymMatrix(mat_ - o.mat_); }
    SymMatrix operator-() const { return SymMatrix(-mat_); }
    SymMatrix operator*(double s) const { return SymMatrix(mat_ * s); }

    double frobenius_norm() const { return mat_.frobenius_norm(); }
    double max_abs() const { return mat_.max_abs(); }

    bool operator==(const SymMatrix& o) const { return mat_ == o.mat_; }

private:
    Matrix mat_;
};

inline SymMatrix operator*(double s, const SymMatrix& m) { return m * s; }

/// Forces symmetry entrywise; for results that are symmetric in exact
/// arithmetic but carry rounding skew.
inline SymMatrix symmetrize(const Matrix& m) {
    if (!m.square()) throw DimensionError("symmetrize needs a square matrix");
    Matrix s(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) s(i, j) = 0.5 * (m(i, j) + m(j, i));
    return SymMatrix(s);
}

/// T' M T with an exactly symmetric result.
inline SymMatrix sandwich(const Matrix& t, const SymMatrix& m) {
    return symmetrize(t.transpose() * m.matrix() * t);
}

/// (X Y + (X Y)')/2, for products symmetric in exact arithmetic.
inline SymMatrix sym_product(const Matrix& x, const Matrix& y) { return symmetrize(x * y); }

namespace detail {

struct LuFactor {
    Matrix lu;                 // packed L (unit diagonal) and U
    std::vector<std::size_t> perm;
    int sign = 1;
    bool singular = false;
    double min_pivot = 0.0;
};

inline LuFactor lu_factor(const Matrix& m, double singular_tol) {
    if (!m.square()) throw DimensionError("LU factor of non-square matrix");
    m.check_finite();
    const std::size_t n = m.rows();
    LuFactor f{m, std::vector<std::size_t>(n), 1, false, 0.0};
    for (std::size_t i = 0; i < n; ++i) f.perm[i] = i;
    const double threshold = singular_tol * m.frobenius_norm();
    f.min_pivot = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        double best = std::abs(f.lu(k, k));
        for (std::size_t i = k + 1; i < n; ++i) {
            const double v = std::abs(f.lu(i, k));
            if (v > best) {
                best = v;
                piv = i;
            }
        }
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(f.lu(k, j), f.lu(piv, j));
            std::swap(f.perm[k], f.perm[piv]);
            f.sign = -f.sign;
        }
        f.min_pivot = std::min(f.min_pivot, best);
        if (best <= threshold) {
            f.singular = true;
            return f;
        }
        const double inv = 1.0 / f.lu(k, k);
        for (std::size_t i = k + 1; i < n; ++i) {
            f.lu(i, k) *= inv;
            const double lik = f.lu(i, k);
            if (lik == 0.0) continue;
            for (std::size_t j = k + 1; j < n; ++j) f.lu(i, j) -= lik * f.lu(k, j);
        }
    }
    return f;
}

inline Matrix lu_solve(const LuFactor& f, const Matrix& rhs) {
    const std::size_t n = f.lu.rows();
    if (rhs.rows() != n) throw DimensionError("solve rhs row mismatch");
    Matrix x(n, rhs.cols());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < rhs.cols(); ++j) x(i, j) = rhs(f.perm[i], j);
    // forward substitution, unit lower triangle
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = k + 1; i < n; ++i) {
            const double lik = f.lu(i, k);
            if (lik == 0.0) continue;
            for (std::size_t j = 0; j < rhs.cols(); ++j) x(i, j) -= lik * x(k, j);
        }
    // back substitution
    for (std::size_t k = n; k-- > 0;) {
        const double inv = 1.0 / f.lu(k, k);
        for (std::size_t j = 0; j < rhs.cols(); ++j) x(k, j) *= inv;
        for (std::size_t i = 0; i < k; ++i) {
            const double uik = f.lu(i, k);
            if (uik == 0.0) continue;
            for (std::size_t j = 0; j < rhs.cols(); ++j) x(i, j) -= uik * x(k, j);
        }
    }
    return x;
}

}  // namespace detail

/// Solves m X = rhs by partial-pivot LU. Throws SingularMatrix when a pivot
/// falls at or below 1e-12 * ||m||_F; singularity is a recoverable signal.
inline Matrix solve(const Matrix& m, const Matrix& rhs, const Tolerances& tol = {}) {
    const auto f = detail::lu_factor(m, tol.singular_tol);
    if (f.singular) throw SingularMatrix("matrix is singular to working tolerance");
    return detail::lu_solve(f, rhs);
}

inline Vector solve(const Matrix& m, const Vector& rhs, const Tolerances& tol = {}) {
    return column_of(solve(m, column_matrix(rhs), tol));
}

inline Matrix inverse(const Matrix& m, const Tolerances& tol = {}) {
    return solve(m, Matrix::identity(m.rows()), tol);
}

/// Determinant via LU; returns 0 when a pivot hits the singularity threshold.
inline double determinant(const Matrix& m, const Tolerances& tol = {}) {
    const auto f = detail::lu_factor(m, tol.singular_tol);
    if (f.singular) return 0.0;
    double d = static_cast<double>(f.sign);
    for (std::size_t i = 0; i < m.rows(); ++i) d *= f.lu(i, i);
    return d;
}

/// Lower Cholesky factor, or nullopt when a diagonal pivot drops to
/// 1e-12 * max(1, ||m||_F) or below (the not-positive-definite signal).
inline std::optional<Matrix> cholesky(const SymMatrix& m, const Tolerances& tol = {}) {
    const std::size_t n = m.dim();
    const double threshold = tol.singular_tol * std::max(1.0, m.frobenius_norm());
    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = m(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (d <= threshold) return std::nullopt;
        l(j, j) = std::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            double v = m(i, j);
            for (std::size_t k = 0; k < j; ++k) v -= l(i, k) * l(j, k);
            l(i, j) = v / l(j, j);
        }
    }
    return l;
}

/// Solves L L' x = rhs given a lower Cholesky factor.
inline Vector cholesky_solve(const Matrix& l, const Vector& rhs) {
    const std::size_t n = l.rows();
    if (rhs.size() != n) throw DimensionError("cholesky_solve size mismatch");
    Vector y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double v = rhs[i];
        for (std::size_t k = 0; k < i; ++k) v -= l(i, k) * y[k];
        y[i] = v / l(i, i);
    }
    Vector x(n);
    for (std::size_t i = n; i-- > 0;) {
        double v = y[i];
        for (std::size_t k = i + 1; k < n; ++k) v -= l(k, i) * x[k];
        x[i] = v / l(i, i);
    }
    return x;
}

inline Matrix cholesky_solve(const Matrix& l, const Matrix& rhs) {
    Matrix x(rhs.rows(), rhs.cols());
    for (std::size_t j = 0; j < rhs.cols(); ++j) {
        Vector col(rhs.rows());
        for (std::size_t i = 0; i < rhs.rows(); ++i) col[i] = rhs(i, j);
        const Vector sol = cholesky_solve(l, col);
        for (std::size_t i = 0; i < rhs.rows(); ++i) x(i, j) = sol[i];
    }
    return x;
}

struct QrPivot {
    Matrix q;                       // full orthogonal factor, rows x rows
    Matrix r;                       // upper trapezoidal, rows x cols (column-permuted)
    std::vector<std::size_t> perm;  // r applies to columns perm[j] of the input
    std::size_t rank = 0;           // |r_kk| >= rank_tol * |r_00|
};

/// Householder QR with column pivoting; the leading `rank` columns of q span
/// the column space of m at the given relative tolerance.
inline QrPivot qr_column_pivot(const Matrix& m, double rank_tol = 1e-9) {
    const std::size_t rows = m.rows();
    const std::size_t cols = m.cols();
    QrPivot out{Matrix::identity(rows), m, std::vector<std::size_t>(cols), 0};
    for (std::size_t j = 0; j < cols; ++j) out.perm[j] = j;

    std::vector<double> colnorm(cols);
    auto norm_of_col = [&](std::size_t j, std::size_t from) {
        double acc = 0.0;
        for (std::size_t i = from; i < rows; ++i) acc += out.r(i, j) * out.r(i, j);
        return std::sqrt(acc);
    };

    const std::size_t steps = std::min(rows, cols);
    double first_pivot = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
        for (std::size_t j = k; j < cols; ++j) colnorm[j] = norm_of_col(j, k);
        std::size_t best = k;
        for (std::size_t j = k + 1; j < cols; ++j)
            if (colnorm[j] > colnorm[best]) best = j;
        if (best != k) {
            for (std::size_t i = 0; i < rows; ++i) std::swap(out.r(i, k), out.r(i, best));
            std::swap(out.perm[k], out.perm[best]);
        }
        const double alpha = colnorm[best];
        if (k == 0) first_pivot = alpha;
        if (alpha <= rank_tol * std::max(first_pivot, 1e-300)) break;
        out.rank = k + 1;

        // Householder vector for column k, rows k..end
        std::vector<double> v(rows - k, 0.0);
        for (std::size_t i = k; i < rows; ++i) v[i - k] = out.r(i, k);
        const double sign = v[0] >= 0.0 ? 1.0 : -1.0;
        v[0] += sign * alpha;
        double vnorm2 = 0.0;
        for (double x : v) vnorm2 += x * x;
        if (vnorm2 == 0.0) continue;

        auto apply_left = [&](Matrix& a) {
            for (std::size_t j = 0; j < a.cols(); ++j) {
                double proj = 0.0;
                for (std::size_t i = k; i < rows; ++i) proj += v[i - k] * a(i, j);
                const double c = 2.0 * proj / vnorm2;
                for (std::size_t i = k; i < rows; ++i) a(i, j) -= c * v[i - k];
            }
        };
        apply_left(out.r);
        // accumulate q by applying the same reflector to q' (i.e. right-mult of q)
        for (std::size_t i = 0; i < rows; ++i) {
            double proj = 0.0;
            for (std::size_t l = k; l < rows; ++l) proj += v[l - k] * out.q(i, l);
            const double c = 2.0 * proj / vnorm2;
            for (std::size_t l = k; l < rows; ++l) out.q(i, l) -= c * v[l - k];
        }
    }
    return out;
}

}  // namespace rhlq::la
