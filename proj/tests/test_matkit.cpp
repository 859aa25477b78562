#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "rhlq/eigen.hpp"
#include "rhlq/matrix.hpp"

using namespace rhlq;
using namespace rhlq::la;

namespace {

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo = -2.0,
                     double hi = 2.0) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = rng.uniform(lo, hi);
    return m;
}

SymMatrix random_symmetric(Rng& rng, std::size_t n, double lo = -2.0, double hi = 2.0) {
    return symmetrize(random_matrix(rng, n, n, lo, hi));
}

}  // namespace

TEST_CASE("matrix construction validates shape and entries") {
    CHECK_THROWS_AS(Matrix(0, 3), DimensionError);
    CHECK_THROWS_AS(Matrix({{1.0, 2.0}, {3.0}}), DimensionError);
    CHECK_THROWS_AS(Matrix({{1.0, std::nan("")}}), NonFiniteError);
    const Matrix m({{1.0, 2.0}, {3.0, 4.0}});
    CHECK(m(1, 0) == 3.0);
    CHECK(m.transpose()(0, 1) == 3.0);
}

TEST_CASE("symmetric matrix enforces symmetry tolerance") {
    CHECK_THROWS_AS(SymMatrix(Matrix({{1.0, 2.0}, {0.5, 1.0}})), DimensionError);
    // a defect below 1e-12 * scale is symmetrized away
    const double eps = 1e-14;
    const SymMatrix s(Matrix({{1.0, 2.0 + eps}, {2.0, 1.0}}));
    CHECK(s(0, 1) == s(1, 0));
}

TEST_CASE("eigenvalues of small fixed matrices") {
    SECTION("1x1") {
        const Spectrum sp = eigenvalues(Matrix({{2.0}}));
        REQUIRE(sp.eigenvalues.size() == 1);
        CHECK(sp.eigenvalues[0].real() == Catch::Approx(2.0));
        CHECK(sp.spectral_radius == Catch::Approx(2.0));
    }
    SECTION("rotation matrix has +-i") {
        const Spectrum sp = eigenvalues(Matrix({{0.0, 1.0}, {-1.0, 0.0}}));
        REQUIRE(sp.eigenvalues.size() == 2);
        CHECK(sp.eigenvalues[0].real() == Catch::Approx(0.0).margin(1e-12));
        CHECK(std::abs(sp.eigenvalues[0].imag()) == Catch::Approx(1.0));
        CHECK(sp.eigenvalues[0].imag() == Catch::Approx(-sp.eigenvalues[1].imag()));
        CHECK(sp.spectral_radius == Catch::Approx(1.0));
    }
    SECTION("diagonal") {
        const Spectrum sp = eigenvalues(Matrix({{0.5, 0.0}, {0.0, 2.0}}));
        CHECK(sp.eigenvalues[0].real() == Catch::Approx(0.5));
        CHECK(sp.eigenvalues[1].real() == Catch::Approx(2.0));
        CHECK(sp.spectral_radius == Catch::Approx(2.0));
    }
    SECTION("non-square rejected") {
        CHECK_THROWS_AS(eigenvalues(Matrix(2, 3)), DimensionError);
    }
}

TEST_CASE("eigenvalue product matches determinant and sum matches trace") {
    Rng rng(12345);
    for (int rep = 0; rep < 60; ++rep) {
        const std::size_t n = 1 + rng.below(8);
        const Matrix m = random_matrix(rng, n, n);
        const Spectrum sp = eigenvalues(m);
        REQUIRE(sp.eigenvalues.size() == n);
        std::complex<double> prod{1.0, 0.0};
        std::complex<double> sum{0.0, 0.0};
        for (const auto& ev : sp.eigenvalues) {
            prod *= ev;
            sum += ev;
        }
        const double det = determinant(m);
        const double tr = m.trace();
        const double scale_det = std::max(1.0, std::abs(det));
        const double scale_tr = std::max(1.0, std::abs(tr));
        CHECK(std::abs(prod.real() - det) <= 1e-8 * scale_det);
        CHECK(std::abs(prod.imag()) <= 1e-8 * scale_det);
        CHECK(std::abs(sum.real() - tr) <= 1e-8 * scale_tr);
        CHECK(std::abs(sum.imag()) <= 1e-8 * scale_tr);
    }
}

TEST_CASE("schur stability test") {
    CHECK(is_schur_stable(Matrix({{0.5}}), 1e-9));
    CHECK_FALSE(is_schur_stable(Matrix({{2.0}}), 1e-9));
    CHECK_FALSE(is_schur_stable(Matrix::identity(3), 1e-9));
}

TEST_CASE("definiteness classification") {
    CHECK(definiteness(SymMatrix({{3.0, 2.0}, {2.0, 2.0}})) == Definiteness::PositiveDefinite);
    CHECK(definiteness(SymMatrix::zeros(2)) == Definiteness::PositiveSemidefinite);
    CHECK(definiteness(SymMatrix({{1.0, 0.0}, {0.0, -1.0}})) == Definiteness::Indefinite);
    CHECK(definiteness(SymMatrix({{-2.0, 0.0}, {0.0, -3.0}})) == Definiteness::NegativeDefinite);
    CHECK(definiteness(SymMatrix({{0.0, 0.0}, {0.0, -1.0}})) ==
          Definiteness::NegativeSemidefinite);
    CHECK_THROWS_AS(definiteness(SymMatrix::identity(2), -1.0), DimensionError);
}

TEST_CASE("definiteness mirrors under sign flip") {
    Rng rng(777);
    auto mirror = [](Definiteness d) {
        switch (d) {
            case Definiteness::PositiveDefinite: return Definiteness::NegativeDefinite;
            case Definiteness::NegativeDefinite: return Definiteness::PositiveDefinite;
            case Definiteness::PositiveSemidefinite: return Definiteness::NegativeSemidefinite;
            case Definiteness::NegativeSemidefinite: return Definiteness::PositiveSemidefinite;
            default: return Definiteness::Indefinite;
        }
    };
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t n = 1 + rng.below(6);
        const SymMatrix s = random_symmetric(rng, n);
        CHECK(definiteness(-s) == mirror(definiteness(s)));
    }
}

TEST_CASE("symmetric eigenvalues match hand values") {
    // eigenvalues of [[3,2],[2,2]] are (5 +- sqrt(17)) / 2
    const auto evs = symmetric_eigenvalues(SymMatrix({{3.0, 2.0}, {2.0, 2.0}}));
    CHECK(evs[0] == Catch::Approx((5.0 - std::sqrt(17.0)) / 2.0).epsilon(1e-12));
    CHECK(evs[1] == Catch::Approx((5.0 + std::sqrt(17.0)) / 2.0).epsilon(1e-12));
}

TEST_CASE("linear solve") {
    SECTION("identity") {
        const Matrix b({{1.0}, {2.0}});
        CHECK(solve(Matrix::identity(2), b) == b);
    }
    SECTION("scalar") {
        const Matrix x = solve(Matrix({{2.0}}), Matrix({{1.0}}));
        CHECK(x(0, 0) == Catch::Approx(0.5));
    }
    SECTION("singular input signals") {
        CHECK_THROWS_AS(solve(Matrix({{1.0, 1.0}, {1.0, 1.0}}), Matrix(2, 1)), SingularMatrix);
    }
    SECTION("round trip on random well-conditioned systems") {
        Rng rng(99);
        for (int rep = 0; rep < 40; ++rep) {
            const std::size_t n = 1 + rng.below(8);
            Matrix m = random_matrix(rng, n, n);
            for (std::size_t i = 0; i < n; ++i) m(i, i) += 4.0;  // keep conditioning mild
            const Vector x = column_of(random_matrix(rng, n, 1));
            const Vector rhs = m * x;
            const Vector sol = solve(m, rhs);
            CHECK((sol - x).norm() <= 1e-8 * std::max(1.0, x.norm()));
        }
    }
}

TEST_CASE("determinant of fixed matrices") {
    CHECK(determinant(Matrix({{1.0, 1.0}, {1.0, 1.0}})) == 0.0);
    CHECK(determinant(Matrix({{1.0, 2.0}, {3.0, 4.0}})) == Catch::Approx(-2.0));
}

TEST_CASE("cholesky") {
    SECTION("identity factors to identity") {
        const auto l = cholesky(SymMatrix::identity(3));
        REQUIRE(l.has_value());
        CHECK((*l - Matrix::identity(3)).frobenius_norm() <= 1e-14);
    }
    SECTION("scalar") {
        const auto l = cholesky(SymMatrix({{4.0}}));
        REQUIRE(l.has_value());
        CHECK((*l)(0, 0) == Catch::Approx(2.0));
    }
    SECTION("zero matrix is not PD") {
        CHECK_FALSE(cholesky(SymMatrix({{0.0}})).has_value());
    }
    SECTION("reconstruction accuracy") {
        Rng rng(4242);
        for (int rep = 0; rep < 30; ++rep) {
            const std::size_t n = 1 + rng.below(6);
            const Matrix g = random_matrix(rng, n, n);
            const SymMatrix spd =
                SymMatrix(symmetrize(g.transpose() * g).matrix() + Matrix::identity(n) * 0.5);
            const auto l = cholesky(spd);
            REQUIRE(l.has_value());
            const Matrix rec = *l * l->transpose();
            CHECK((rec - spd.matrix()).frobenius_norm() <= 1e-12 * spd.frobenius_norm());
        }
    }
}

TEST_CASE("qr with column pivoting exposes rank and column space") {
    Rng rng(31);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 2 + rng.below(5);
        const std::size_t r = 1 + rng.below(n);
        const Matrix left = random_matrix(rng, n, r);
        const Matrix right = random_matrix(rng, r, n + 1);
        const Matrix m = left * right;  // rank r generically
        const QrPivot f = qr_column_pivot(m, 1e-9);
        CHECK(f.rank == r);
        // q orthogonal
        const Matrix qtq = f.q.transpose() * f.q;
        CHECK((qtq - Matrix::identity(n)).frobenius_norm() <= 1e-10);
    }
}
