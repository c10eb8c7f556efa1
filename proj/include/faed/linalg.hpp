#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace faed::linalg {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);
    static Matrix diagonal(std::span<const double> diag);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool square() const noexcept { return rows_ == cols_; }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    const std::vector<double>& data() const noexcept { return data_; }
    std::vector<double>& data() noexcept { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);
double trace(const Matrix& a);
double frobenius_norm(const Matrix& a);
/// Largest |a_ij - a_ji|; requires a square matrix.
double asymmetry(const Matrix& a);

struct SymEig {
    Vector eigenvalues;  // ascending
    Matrix eigenvectors; // column k pairs with eigenvalues[k]
};

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
/// Throws DimensionError for non-square input and SymmetryError when
/// |a_ij - a_ji| exceeds 1e-8.
SymEig sym_eig(const Matrix& a);

/// Principal square root of a symmetric positive semi-definite matrix.
/// Eigenvalues in [-1e-8 * trace / n, 0) are clamped to zero; anything more
/// negative raises NotPsdError carrying that eigenvalue.
Matrix sqrtm_psd(const Matrix& a);

/// Lowest eigenvalue accepted as "numerically zero" for a PSD check.
double psd_floor(const Matrix& a);

struct GaussianSummary {
    Vector mean;
    Matrix cov;

    std::size_t dim() const noexcept { return mean.size(); }
};

/// Mean and unbiased (N-1) covariance of the rows of `samples`.
GaussianSummary gaussian_summary(const Matrix& samples);
GaussianSummary gaussian_summary(std::span<const Vector> samples);

}  // namespace faed::linalg
