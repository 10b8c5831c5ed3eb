// SPDX-License-Identifier: Apache-2.0
//
// Dense complex matrices in double precision. Storage is row-major
// std::complex<double>, i.e. interleaved real/imaginary scalars. These
// routines sit outside the autodiff graph.
#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace wfm {

using cd = std::complex<double>;

class ComplexMatrix {
public:
    ComplexMatrix() = default;
    ComplexMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}
    ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<cd> data);

    static ComplexMatrix identity(std::size_t n);
    /// Column vector (n x 1).
    static ComplexMatrix column(const std::vector<cd>& v);
    /// Matrix whose columns are the given vectors.
    static ComplexMatrix from_columns(const std::vector<std::vector<cd>>& cols);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    cd& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    const cd& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    const std::vector<cd>& data() const { return data_; }
    std::vector<cd>& data() { return data_; }

    std::vector<cd> col(std::size_t j) const;
    std::vector<cd> row(std::size_t i) const;

    ComplexMatrix operator+(const ComplexMatrix& o) const;
    ComplexMatrix operator-(const ComplexMatrix& o) const;
    ComplexMatrix operator*(cd s) const;

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<cd> data_;
};

class SingularMatrixError : public std::runtime_error {
public:
    SingularMatrixError(const std::string& what, double condition_estimate)
        : std::runtime_error(what), condition_estimate_(condition_estimate)
    {
    }
    double condition_estimate() const { return condition_estimate_; }

private:
    double condition_estimate_;
};

constexpr double kDefaultConditionCeiling = 1e12;

ComplexMatrix cmatmul(const ComplexMatrix& a, const ComplexMatrix& b);
ComplexMatrix hermitian(const ComplexMatrix& a);
double frobenius_norm(const ComplexMatrix& a);
double frobenius_norm_sq(const ComplexMatrix& a);

/// Thin SVD A = U diag(S) V^H with k = min(rows, cols) singular values in
/// non-increasing order. One-sided Jacobi.
struct Svd {
    ComplexMatrix U; // rows x k
    std::vector<double> S;
    ComplexMatrix V; // cols x k
};
Svd svd(const ComplexMatrix& a);

/// Gauss-Jordan inverse with partial pivoting. Throws SingularMatrixError when
/// the 1-norm condition estimate exceeds `ceiling`.
ComplexMatrix inverse(const ComplexMatrix& a, double ceiling = kDefaultConditionCeiling);

/// 1-norm condition number ||A||_1 ||A^-1||_1 (infinite for singular A).
double condition_1(const ComplexMatrix& a);

/// log2 det of a Hermitian positive-definite matrix via Cholesky.
double log2_det_hpd(const ComplexMatrix& a);

/// F[k][m] = exp(-j 2 pi k m / n).
ComplexMatrix dft_matrix(std::size_t n);

cd inner(const std::vector<cd>& a, const std::vector<cd>& b); // a^H b
double norm_sq(const std::vector<cd>& a);

} // namespace wfm
