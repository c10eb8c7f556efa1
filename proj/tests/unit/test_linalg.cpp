#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "faed/error.hpp"
#include "faed/linalg.hpp"
#include "oracles.hpp"

using namespace faed;
using namespace faed::linalg;

namespace {

double orthonormality_error(const Matrix& v) {
    const Matrix vtv = transpose(v) * v;
    return frobenius_norm(vtv - Matrix::identity(v.rows()));
}

Matrix reconstruct(const SymEig& e) {
    return e.eigenvectors * Matrix::diagonal(e.eigenvalues) * transpose(e.eigenvectors);
}

}  // namespace

TEST_CASE("sym_eig of the identity") {
    const auto e = sym_eig(Matrix::identity(3));
    for (double l : e.eigenvalues) CHECK(l == doctest::Approx(1.0));
    CHECK(orthonormality_error(e.eigenvectors) <= 1e-12);
}

TEST_CASE("sym_eig of a diagonal matrix sorts ascending") {
    const double d[] = {4.0, 1.0};
    const auto e = sym_eig(Matrix::diagonal(d));
    CHECK(e.eigenvalues[0] == 1.0);
    CHECK(e.eigenvalues[1] == 4.0);
}

TEST_CASE("sym_eig reconstructs random symmetric matrices") {
    RngStream rng(11, 0);
    for (std::size_t n : {1u, 2u, 5u, 8u, 17u, 40u}) {
        const Matrix a = testing::random_symmetric(n, rng);
        const auto e = sym_eig(a);
        CHECK(frobenius_norm(reconstruct(e) - a) <= 1e-9 * (1.0 + frobenius_norm(a)));
        CHECK(orthonormality_error(e.eigenvectors) <= 1e-9);
        CHECK(std::is_sorted(e.eigenvalues.begin(), e.eigenvalues.end()));
        const double sum = std::accumulate(e.eigenvalues.begin(), e.eigenvalues.end(), 0.0);
        CHECK(std::abs(sum - trace(a)) <= 1e-9 * (1.0 + std::abs(trace(a))));

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> oracle(testing::to_eigen(a));
        for (std::size_t k = 0; k < n; ++k) {
            CHECK(std::abs(e.eigenvalues[k] - oracle.eigenvalues()(k)) <= 1e-9 * (1.0 + frobenius_norm(a)));
        }
    }
}

TEST_CASE("sym_eig rejects bad input") {
    CHECK_THROWS_AS(sym_eig(Matrix(2, 3)), DimensionError);
    Matrix a = Matrix::identity(2);
    a(0, 1) = 1e-3;
    CHECK_THROWS_AS(sym_eig(a), SymmetryError);
    a(0, 1) = 5e-9;  // inside the symmetry tolerance
    CHECK_NOTHROW(sym_eig(a));
}

TEST_CASE("sqrtm_psd of simple matrices") {
    CHECK(frobenius_norm(sqrtm_psd(Matrix::identity(4)) - Matrix::identity(4)) <= 1e-14);
    const double d[] = {4.0, 9.0};
    const Matrix s = sqrtm_psd(Matrix::diagonal(d));
    CHECK(s(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(s(1, 1) == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(s(0, 1) == 0.0);
}

TEST_CASE("sqrtm_psd squares back and commutes with its argument") {
    RngStream rng(12, 0);
    for (std::size_t n : {2u, 7u, 16u}) {
        const Matrix a = testing::random_spd(n, rng);
        const Matrix s = sqrtm_psd(a);
        CHECK(asymmetry(s) == 0.0);
        CHECK(frobenius_norm(s * s - a) <= 1e-8 * (1.0 + frobenius_norm(a)));
        CHECK(frobenius_norm(s * a - a * s) <= 1e-8 * frobenius_norm(a));
    }
}

TEST_CASE("sqrtm_psd clamps round-off negatives and rejects real ones") {
    // Rank-one PSD matrix: its zero eigenvalues may come out as tiny negatives.
    Matrix a(3, 3);
    const double v[] = {1.0, 2.0, -1.5};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) a(i, j) = v[i] * v[j];
    const Matrix s = sqrtm_psd(a);
    CHECK(frobenius_norm(s * s - a) <= 1e-8 * (1.0 + frobenius_norm(a)));

    const double d[] = {1.0, -0.5};
    try {
        sqrtm_psd(Matrix::diagonal(d));
        FAIL("expected NotPsdError");
    } catch (const NotPsdError& e) {
        CHECK(e.eigenvalue() == -0.5);
    }

    // Just inside the clamp window: -1e-8 * trace / n with trace = 2, n = 2.
    const double edge[] = {2.0, -0.9e-8};
    CHECK_NOTHROW(sqrtm_psd(Matrix::diagonal(edge)));
    const double beyond[] = {2.0, -1.1e-8};
    CHECK_THROWS_AS(sqrtm_psd(Matrix::diagonal(beyond)), NotPsdError);
}

TEST_CASE("gaussian_summary basics") {
    SUBCASE("identical vectors have zero covariance") {
        const std::vector<Vector> s(5, Vector{1.5, -2.0, 3.0});
        const auto g = gaussian_summary(std::span<const Vector>(s));
        CHECK(g.mean == Vector{1.5, -2.0, 3.0});
        for (double c : g.cov.data()) CHECK(c == 0.0);
    }
    SUBCASE("unbiased denominator") {
        const std::vector<Vector> s{{0.0}, {2.0}};
        const auto g = gaussian_summary(std::span<const Vector>(s));
        CHECK(g.mean[0] == 1.0);
        CHECK(g.cov(0, 0) == 2.0);
    }
    SUBCASE("too few samples") {
        const std::vector<Vector> s{{1.0, 2.0}};
        CHECK_THROWS_AS(gaussian_summary(std::span<const Vector>(s)), InsufficientDataError);
    }
    SUBCASE("ragged samples") {
        const std::vector<Vector> s{{1.0, 2.0}, {1.0}};
        CHECK_THROWS_AS(gaussian_summary(std::span<const Vector>(s)), DimensionError);
    }
}

TEST_CASE("gaussian_summary recovers a known diagonal Gaussian") {
    const double sd[] = {0.5, 1.0, 2.0, 3.0};
    RngStream rng(13, 0);
    Matrix samples(1000, 4);
    for (std::size_t r = 0; r < 1000; ++r)
        for (std::size_t k = 0; k < 4; ++k) samples(r, k) = 1.0 + sd[k] * rng.normal();
    const auto g = gaussian_summary(samples);
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(std::abs(g.cov(k, k) - sd[k] * sd[k]) <= 0.15 * sd[k] * sd[k]);
    }
    CHECK(asymmetry(g.cov) == 0.0);
}

TEST_CASE("gaussian_summary is invariant to sample order") {
    RngStream rng(14, 0);
    Matrix samples(64, 6);
    for (double& v : samples.data()) v = rng.normal();
    std::vector<std::size_t> perm(64);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
    Matrix shuffled(64, 6);
    for (std::size_t r = 0; r < 64; ++r)
        std::copy(samples.row(perm[r]).begin(), samples.row(perm[r]).end(), shuffled.row(r).begin());

    const auto a = gaussian_summary(samples);
    const auto b = gaussian_summary(shuffled);
    for (std::size_t k = 0; k < 6; ++k) CHECK(a.mean[k] == doctest::Approx(b.mean[k]).epsilon(1e-12));
    CHECK(frobenius_norm(a.cov - b.cov) <= 1e-12 * frobenius_norm(a.cov));
}
