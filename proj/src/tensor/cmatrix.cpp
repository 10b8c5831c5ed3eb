// SPDX-License-Identifier: Apache-2.0
#include "wfm/cmatrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

namespace wfm {

namespace {
[[noreturn]] void dim_fail(const char* op, const ComplexMatrix& a, const ComplexMatrix& b)
{
    std::ostringstream os;
    os << op << ": incompatible shapes (" << a.rows() << "x" << a.cols() << ") and (" << b.rows() << "x" << b.cols()
       << ")";
    throw std::invalid_argument(os.str());
}
} // namespace

ComplexMatrix::ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<cd> data)
    : rows_(rows), cols_(cols), data_(std::move(data))
{
    if (data_.size() != rows * cols)
        throw std::invalid_argument("ComplexMatrix: " + std::to_string(data_.size()) + " entries for " +
                                    std::to_string(rows) + "x" + std::to_string(cols));
    for (const auto& z : data_)
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
            throw std::invalid_argument("ComplexMatrix: non-finite entry");
}

ComplexMatrix ComplexMatrix::identity(std::size_t n)
{
    ComplexMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        m(i, i) = 1.0;
    return m;
}

ComplexMatrix ComplexMatrix::column(const std::vector<cd>& v)
{
    return ComplexMatrix(v.size(), 1, v);
}

ComplexMatrix ComplexMatrix::from_columns(const std::vector<std::vector<cd>>& cols)
{
    if (cols.empty())
        return {};
    ComplexMatrix m(cols[0].size(), cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j) {
        if (cols[j].size() != m.rows())
            throw std::invalid_argument("from_columns: ragged columns");
        for (std::size_t i = 0; i < m.rows(); ++i)
            m(i, j) = cols[j][i];
    }
    return m;
}

std::vector<cd> ComplexMatrix::col(std::size_t j) const
{
    std::vector<cd> v(rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        v[i] = (*this)(i, j);
    return v;
}

std::vector<cd> ComplexMatrix::row(std::size_t i) const
{
    return std::vector<cd>(data_.begin() + i * cols_, data_.begin() + (i + 1) * cols_);
}

ComplexMatrix ComplexMatrix::operator+(const ComplexMatrix& o) const
{
    if (rows_ != o.rows_ || cols_ != o.cols_)
        dim_fail("add", *this, o);
    ComplexMatrix r(rows_, cols_);
    for (std::size_t i = 0; i < data_.size(); ++i)
        r.data_[i] = data_[i] + o.data_[i];
    return r;
}

ComplexMatrix ComplexMatrix::operator-(const ComplexMatrix& o) const
{
    if (rows_ != o.rows_ || cols_ != o.cols_)
        dim_fail("sub", *this, o);
    ComplexMatrix r(rows_, cols_);
    for (std::size_t i = 0; i < data_.size(); ++i)
        r.data_[i] = data_[i] - o.data_[i];
    return r;
}

ComplexMatrix ComplexMatrix::operator*(cd s) const
{
    ComplexMatrix r = *this;
    for (auto& z : r.data_)
        z *= s;
    return r;
}

ComplexMatrix cmatmul(const ComplexMatrix& a, const ComplexMatrix& b)
{
    if (a.cols() != b.rows())
        dim_fail("cmatmul", a, b);
    ComplexMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t p = 0; p < a.cols(); ++p) {
            const cd av = a(i, p);
            for (std::size_t j = 0; j < b.cols(); ++j)
                c(i, j) += av * b(p, j);
        }
    return c;
}

ComplexMatrix hermitian(const ComplexMatrix& a)
{
    ComplexMatrix h(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            h(j, i) = std::conj(a(i, j));
    return h;
}

double frobenius_norm_sq(const ComplexMatrix& a)
{
    double s = 0.0;
    for (const auto& z : a.data())
        s += std::norm(z);
    return s;
}

double frobenius_norm(const ComplexMatrix& a)
{
    return std::sqrt(frobenius_norm_sq(a));
}

cd inner(const std::vector<cd>& a, const std::vector<cd>& b)
{
    if (a.size() != b.size())
        throw std::invalid_argument("inner: length mismatch");
    cd s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += std::conj(a[i]) * b[i];
    return s;
}

double norm_sq(const std::vector<cd>& a)
{
    double s = 0.0;
    for (const auto& z : a)
        s += std::norm(z);
    return s;
}

namespace {

// Hestenes one-sided Jacobi for rows >= cols.
Svd svd_tall(const ComplexMatrix& a)
{
    const std::size_t m = a.rows(), n = a.cols();
    ComplexMatrix w = a;
    ComplexMatrix v = ComplexMatrix::identity(n);
    constexpr double tol = 1e-15;
    for (int sweep = 0; sweep < 100; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                double alpha = 0.0, beta = 0.0;
                cd gamma = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    alpha += std::norm(w(i, p));
                    beta += std::norm(w(i, q));
                    gamma += std::conj(w(i, p)) * w(i, q);
                }
                const double g = std::abs(gamma);
                if (g <= tol * std::sqrt(alpha * beta) || g == 0.0)
                    continue;
                rotated = true;
                const cd phase = std::conj(gamma) / g;
                const double zeta = (beta - alpha) / (2.0 * g);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < m; ++i) {
                    const cd ap = w(i, p);
                    const cd aq = w(i, q) * phase;
                    w(i, p) = c * ap - s * aq;
                    w(i, q) = s * ap + c * aq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const cd vp = v(i, p);
                    const cd vq = v(i, q) * phase;
                    v(i, p) = c * vp - s * vq;
                    v(i, q) = s * vp + c * vq;
                }
            }
        if (!rotated)
            break;
    }

    std::vector<double> sigma(n);
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            s += std::norm(w(i, j));
        sigma[j] = std::sqrt(s);
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

    Svd out;
    out.U = ComplexMatrix(m, n);
    out.V = ComplexMatrix(n, n);
    out.S.resize(n);
    const double smax = n ? sigma[order[0]] : 0.0;
    std::vector<bool> filled(n, false);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t j = order[k];
        out.S[k] = sigma[j];
        for (std::size_t i = 0; i < n; ++i)
            out.V(i, k) = v(i, j);
        if (sigma[j] > smax * 1e-14 && sigma[j] > 0.0) {
            for (std::size_t i = 0; i < m; ++i)
                out.U(i, k) = w(i, j) / sigma[j];
            filled[k] = true;
        }
    }
    // Complete U with orthonormal columns where the singular value vanished.
    std::size_t basis = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (filled[k])
            continue;
        while (basis < m) {
            std::vector<cd> e(m, 0.0);
            e[basis++] = 1.0;
            for (std::size_t c = 0; c < n; ++c)
                if (filled[c]) {
                    const auto uc = out.U.col(c);
                    const cd proj = inner(uc, e);
                    for (std::size_t i = 0; i < m; ++i)
                        e[i] -= proj * uc[i];
                }
            const double nrm = std::sqrt(norm_sq(e));
            if (nrm > 1e-8) {
                for (std::size_t i = 0; i < m; ++i)
                    out.U(i, k) = e[i] / nrm;
                filled[k] = true;
                break;
            }
        }
    }
    return out;
}

} // namespace

Svd svd(const ComplexMatrix& a)
{
    if (a.rows() >= a.cols())
        return svd_tall(a);
    Svd t = svd_tall(hermitian(a));
    return Svd{std::move(t.V), std::move(t.S), std::move(t.U)};
}

namespace {
double norm1(const ComplexMatrix& a)
{
    double best = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.rows(); ++i)
            s += std::abs(a(i, j));
        best = std::max(best, s);
    }
    return best;
}

// Returns false when a zero pivot is met.
bool gauss_jordan(const ComplexMatrix& a, ComplexMatrix& inv)
{
    const std::size_t n = a.rows();
    ComplexMatrix w = a;
    inv = ComplexMatrix::identity(n);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        double best = std::abs(w(col, col));
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(w(r, col)) > best) {
                best = std::abs(w(r, col));
                piv = r;
            }
        if (best == 0.0)
            return false;
        if (piv != col)
            for (std::size_t j = 0; j < n; ++j) {
                std::swap(w(piv, j), w(col, j));
                std::swap(inv(piv, j), inv(col, j));
            }
        const cd d = 1.0 / w(col, col);
        for (std::size_t j = 0; j < n; ++j) {
            w(col, j) *= d;
            inv(col, j) *= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col)
                continue;
            const cd f = w(r, col);
            if (f == cd(0.0))
                continue;
            for (std::size_t j = 0; j < n; ++j) {
                w(r, j) -= f * w(col, j);
                inv(r, j) -= f * inv(col, j);
            }
        }
    }
    return true;
}
} // namespace

double condition_1(const ComplexMatrix& a)
{
    if (a.rows() != a.cols())
        throw std::invalid_argument("condition_1: matrix is not square");
    ComplexMatrix inv;
    if (!gauss_jordan(a, inv))
        return std::numeric_limits<double>::infinity();
    const double k = norm1(a) * norm1(inv);
    return std::isfinite(k) ? k : std::numeric_limits<double>::infinity();
}

ComplexMatrix inverse(const ComplexMatrix& a, double ceiling)
{
    if (a.rows() != a.cols())
        throw std::invalid_argument("inverse: matrix is not square (" + std::to_string(a.rows()) + "x" +
                                    std::to_string(a.cols()) + ")");
    ComplexMatrix inv;
    double kappa = std::numeric_limits<double>::infinity();
    if (gauss_jordan(a, inv)) {
        kappa = norm1(a) * norm1(inv);
        if (!std::isfinite(kappa))
            kappa = std::numeric_limits<double>::infinity();
    }
    if (!(kappa <= ceiling)) {
        std::ostringstream os;
        os << "inverse: matrix is singular to working precision (condition estimate " << kappa << " exceeds "
           << ceiling << ")";
        throw SingularMatrixError(os.str(), kappa);
    }
    return inv;
}

double log2_det_hpd(const ComplexMatrix& a)
{
    const std::size_t n = a.rows();
    if (a.cols() != n)
        throw std::invalid_argument("log2_det_hpd: matrix is not square");
    ComplexMatrix l(n, n);
    double logdet = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j).real();
        for (std::size_t k = 0; k < j; ++k)
            d -= std::norm(l(j, k));
        if (!(d > 0.0))
            throw std::domain_error("log2_det_hpd: matrix is not positive definite");
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        logdet += 2.0 * std::log2(ljj);
        for (std::size_t i = j + 1; i < n; ++i) {
            cd s = a(i, j);
            for (std::size_t k = 0; k < j; ++k)
                s -= l(i, k) * std::conj(l(j, k));
            l(i, j) = s / ljj;
        }
    }
    return logdet;
}

ComplexMatrix dft_matrix(std::size_t n)
{
    ComplexMatrix f(n, n);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t m = 0; m < n; ++m) {
            // Reduce k*m mod n first so the angle stays small and exact.
            const double ang = -2.0 * std::numbers::pi * static_cast<double>((k * m) % n) / static_cast<double>(n);
            f(k, m) = std::polar(1.0, ang);
        }
    return f;
}

} // namespace wfm
