#include "faed/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "faed/error.hpp"

namespace faed::linalg {

namespace {

constexpr double kSymmetryTol = 1e-8;
constexpr double kPsdRelTol = 1e-8;
constexpr int kMaxSweeps = 100;

void require_square(const Matrix& a, const char* who) {
    if (!a.square()) {
        throw DimensionError(std::string(who) + ": expected a square matrix, got " + std::to_string(a.rows()) + "x" +
                             std::to_string(a.cols()));
    }
}

void require_symmetric(const Matrix& a, const char* who) {
    require_square(a, who);
    const double asym = asymmetry(a);
    if (!(asym <= kSymmetryTol)) {
        throw SymmetryError(std::string(who) + ": matrix is not symmetric (max |a_ij - a_ji| = " + std::to_string(asym) +
                            ")");
    }
}

double off_diagonal_sq(const Matrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (i != j) s += a(i, j) * a(i, j);
    return s;
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw DimensionError("Matrix: data length " + std::to_string(data_.size()) + " does not match " +
                             std::to_string(rows_) + "x" + std::to_string(cols_));
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diagonal(std::span<const double> diag) {
    Matrix m(diag.size(), diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
    return m;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                             std::to_string(b.rows()) + ")");
    }
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto out = c.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            const auto brow = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) out[j] += aik * brow[j];
        }
    }
    return c;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("matrix add: shape mismatch");
    Matrix c = a;
    for (std::size_t i = 0; i < c.data().size(); ++i) c.data()[i] += b.data()[i];
    return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("matrix subtract: shape mismatch");
    Matrix c = a;
    for (std::size_t i = 0; i < c.data().size(); ++i) c.data()[i] -= b.data()[i];
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

double trace(const Matrix& a) {
    require_square(a, "trace");
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) s += a(i, i);
    return s;
}

double frobenius_norm(const Matrix& a) {
    double s = 0.0;
    for (double v : a.data()) s += v * v;
    return std::sqrt(s);
}

double asymmetry(const Matrix& a) {
    require_square(a, "asymmetry");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = i + 1; j < a.cols(); ++j) worst = std::max(worst, std::abs(a(i, j) - a(j, i)));
    return worst;
}

SymEig sym_eig(const Matrix& input) {
    require_symmetric(input, "sym_eig");
    const std::size_t n = input.rows();

    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.5 * (input(i, j) + input(j, i));
    Matrix v = Matrix::identity(n);

    const double scale_sq = std::max(frobenius_norm(a) * frobenius_norm(a), 1e-300);
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        const double off = off_diagonal_sq(a);
        if (off == 0.0 || off <= 1e-32 * scale_sq) break;

        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double app = a(p, p);
                const double aqq = a(q, q);
                // Past the first few sweeps, drop elements that no longer move the diagonal.
                if (sweep > 3 && std::abs(app) + 100.0 * std::abs(apq) == std::abs(app) &&
                    std::abs(aqq) + 100.0 * std::abs(apq) == std::abs(aqq)) {
                    a(p, q) = 0.0;
                    a(q, p) = 0.0;
                    continue;
                }

                const double theta = (aqq - app) / (2.0 * apq);
                const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

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
                a(p, q) = 0.0;
                a(q, p) = 0.0;

                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return a(l, l) < a(r, r); });

    SymEig out{Vector(n), Matrix(n, n)};
    for (std::size_t k = 0; k < n; ++k) {
        out.eigenvalues[k] = a(order[k], order[k]);
        for (std::size_t r = 0; r < n; ++r) out.eigenvectors(r, k) = v(r, order[k]);
    }
    return out;
}

double psd_floor(const Matrix& a) {
    require_square(a, "psd_floor");
    if (a.rows() == 0) return 0.0;
    return -kPsdRelTol * std::abs(trace(a)) / static_cast<double>(a.rows());
}

Matrix sqrtm_psd(const Matrix& a) {
    require_symmetric(a, "sqrtm_psd");
    const std::size_t n = a.rows();
    const SymEig eig = sym_eig(a);
    const double floor = psd_floor(a);

    Vector roots(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double lambda = eig.eigenvalues[k];
        if (lambda < floor) {
            throw NotPsdError("sqrtm_psd: matrix is not positive semi-definite (eigenvalue " + std::to_string(lambda) +
                                  " below tolerance " + std::to_string(floor) + ")",
                              lambda);
        }
        roots[k] = std::sqrt(std::max(lambda, 0.0));
    }

    // S = V diag(roots) V^T, built symmetric by filling the upper triangle and mirroring.
    Matrix s(n, n);
    const Matrix& v = eig.eigenvectors;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < n; ++k) acc += v(i, k) * roots[k] * v(j, k);
            s(i, j) = acc;
            s(j, i) = acc;
        }
    }
    return s;
}

GaussianSummary gaussian_summary(const Matrix& samples) {
    const std::size_t n = samples.rows();
    const std::size_t d = samples.cols();
    if (n < 2) {
        throw InsufficientDataError("gaussian_summary: need at least 2 samples, got " + std::to_string(n));
    }

    GaussianSummary g{Vector(d, 0.0), Matrix(d, d)};
    for (std::size_t r = 0; r < n; ++r) {
        const auto x = samples.row(r);
        for (std::size_t k = 0; k < d; ++k) g.mean[k] += x[k];
    }
    for (double& m : g.mean) m /= static_cast<double>(n);

    Vector centered(d);
    for (std::size_t r = 0; r < n; ++r) {
        const auto x = samples.row(r);
        for (std::size_t k = 0; k < d; ++k) centered[k] = x[k] - g.mean[k];
        for (std::size_t a = 0; a < d; ++a) {
            const double ca = centered[a];
            auto crow = g.cov.row(a);
            for (std::size_t b = a; b < d; ++b) crow[b] += ca * centered[b];
        }
    }
    const double denom = static_cast<double>(n - 1);
    for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = a; b < d; ++b) {
            const double v = g.cov(a, b) / denom;
            g.cov(a, b) = v;
            g.cov(b, a) = v;
        }
    }
    return g;
}

GaussianSummary gaussian_summary(std::span<const Vector> samples) {
    if (samples.size() < 2) {
        throw InsufficientDataError("gaussian_summary: need at least 2 samples, got " + std::to_string(samples.size()));
    }
    const std::size_t d = samples.front().size();
    Matrix m(samples.size(), d);
    for (std::size_t r = 0; r < samples.size(); ++r) {
        if (samples[r].size() != d) {
            throw DimensionError("gaussian_summary: sample " + std::to_string(r) + " has length " +
                                 std::to_string(samples[r].size()) + ", expected " + std::to_string(d));
        }
        std::copy(samples[r].begin(), samples[r].end(), m.row(r).begin());
    }
    return gaussian_summary(m);
}

}  // namespace faed::linalg
