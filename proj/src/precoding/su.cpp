// SPDX-License-Identifier: Apache-2.0
#include "wfm/precoding.hpp"

#include <cmath>
#include <limits>

namespace wfm {

std::uint64_t binomial(std::uint64_t n, std::uint64_t k)
{
    if (k > n)
        return 0;
    k = std::min(k, n - k);
    std::uint64_t r = 1;
    for (std::uint64_t i = 1; i <= k; ++i)
        r = r * (n - k + i) / i;
    return r;
}

namespace {

// log2 |det(M)| by Gaussian elimination with partial pivoting.
double log2_abs_det(ComplexMatrix m)
{
    const std::size_t n = m.rows();
    double acc = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(m(r, c)) > std::abs(m(piv, c)))
                piv = r;
        if (m(piv, c) == cd(0.0))
            return -std::numeric_limits<double>::infinity();
        if (piv != c)
            for (std::size_t j = 0; j < n; ++j)
                std::swap(m(piv, j), m(c, j));
        acc += std::log2(std::abs(m(c, c)));
        for (std::size_t r = c + 1; r < n; ++r) {
            const cd f = m(r, c) / m(c, c);
            for (std::size_t j = c; j < n; ++j)
                m(r, j) -= f * m(c, j);
        }
    }
    return acc;
}

// log2 det(I + c B Gt^-1 B^H Gr^-1) on the small N_s x N_s blocks.
double objective_small(const ComplexMatrix& B, const ComplexMatrix& Gt, const ComplexMatrix& Gr, double c)
{
    const ComplexMatrix X = cmatmul(cmatmul(cmatmul(B, inverse(Gt)), hermitian(B)), inverse(Gr));
    ComplexMatrix M = X * cd(c, 0.0);
    for (std::size_t i = 0; i < M.rows(); ++i)
        M(i, i) += 1.0;
    return log2_abs_det(M);
}

double snr_linear(double snr_db)
{
    return std::pow(10.0, snr_db / 10.0);
}

// All k-subsets of [0, n) in lexicographic order, flattened.
std::vector<std::size_t> combinations(std::size_t n, std::size_t k)
{
    std::vector<std::size_t> out;
    if (k > n)
        return out;
    std::vector<std::size_t> c(k);
    for (std::size_t i = 0; i < k; ++i)
        c[i] = i;
    for (;;) {
        out.insert(out.end(), c.begin(), c.end());
        std::size_t i = k;
        while (i > 0 && c[i - 1] == n - k + i - 1)
            --i;
        if (i == 0)
            break;
        ++c[i - 1];
        for (std::size_t j = i; j < k; ++j)
            c[j] = c[j - 1] + 1;
    }
    return out;
}

} // namespace

double su_objective(const ComplexMatrix& H, const ComplexMatrix& F_RF, const ComplexMatrix& W_RF, double snr_db,
                    std::size_t n_s)
{
    const ComplexMatrix B = cmatmul(cmatmul(hermitian(W_RF), H), F_RF);
    return objective_small(B, cmatmul(hermitian(F_RF), F_RF), cmatmul(hermitian(W_RF), W_RF),
                           snr_linear(snr_db) / static_cast<double>(n_s));
}

SuSelection su_exhaustive(const ComplexMatrix& H, const Codebook& cb_tx, const Codebook& cb_rx, std::size_t n_s,
                          double snr_db, std::uint64_t budget)
{
    if (n_s == 0 || cb_tx.size() < n_s || cb_rx.size() < n_s)
        throw std::invalid_argument("su_exhaustive: codebooks must hold at least N_s beams");
    if (H.rows() != cb_rx.n_t() || H.cols() != cb_tx.n_t())
        throw std::invalid_argument("su_exhaustive: channel is " + std::to_string(H.rows()) + "x" +
                                    std::to_string(H.cols()) + ", codebooks expect " + std::to_string(cb_rx.n_t()) +
                                    "x" + std::to_string(cb_tx.n_t()));
    const std::uint64_t n_tx = binomial(cb_tx.size(), n_s);
    const std::uint64_t n_rx = binomial(cb_rx.size(), n_s);
    if (n_rx != 0 && n_tx > budget / n_rx)
        throw SearchBudgetError("su_exhaustive: " + std::to_string(n_tx) + " x " + std::to_string(n_rx) +
                                " candidates exceed the search budget of " + std::to_string(budget) +
                                "; use the desk transmit codebook or raise the budget explicitly");

    // Y(r, t) = w_r^H H f_t and the codebook Gram matrices.
    const ComplexMatrix& Fcb = cb_tx.beams;
    ComplexMatrix HF(H.rows(), cb_tx.size());
    for (std::size_t t = 0; t < cb_tx.size(); ++t)
        for (std::size_t i = 0; i < H.rows(); ++i) {
            cd s = 0.0;
            for (std::size_t a = 0; a < H.cols(); ++a)
                s += H(i, a) * Fcb(t, a);
            HF(i, t) = s;
        }
    ComplexMatrix Y(cb_rx.size(), cb_tx.size());
    for (std::size_t r = 0; r < cb_rx.size(); ++r)
        for (std::size_t t = 0; t < cb_tx.size(); ++t) {
            cd s = 0.0;
            for (std::size_t i = 0; i < H.rows(); ++i)
                s += std::conj(cb_rx.beams(r, i)) * HF(i, t);
            Y(r, t) = s;
        }
    auto gram_of = [](const Codebook& cb, const std::size_t* idx, std::size_t k) {
        ComplexMatrix g(k, k);
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = 0; b < k; ++b) {
                cd s = 0.0;
                for (std::size_t i = 0; i < cb.n_t(); ++i)
                    s += std::conj(cb.beams(idx[a], i)) * cb.beams(idx[b], i);
                g(a, b) = s;
            }
        return g;
    };

    const auto tx_sets = combinations(cb_tx.size(), n_s);
    const auto rx_sets = combinations(cb_rx.size(), n_s);
    std::vector<ComplexMatrix> gr_inv;
    for (std::size_t r = 0; r < rx_sets.size(); r += n_s)
        gr_inv.push_back(inverse(gram_of(cb_rx, &rx_sets[r], n_s)));

    const double c = snr_linear(snr_db) / static_cast<double>(n_s);
    SuSelection best;
    best.objective = -std::numeric_limits<double>::infinity();
    ComplexMatrix B(n_s, n_s);
    for (std::size_t t = 0; t < tx_sets.size(); t += n_s) {
        const std::size_t* ts = &tx_sets[t];
        const ComplexMatrix gt_inv = inverse(gram_of(cb_tx, ts, n_s));
        for (std::size_t r = 0, ri = 0; r < rx_sets.size(); r += n_s, ++ri) {
            const std::size_t* rs = &rx_sets[r];
            for (std::size_t a = 0; a < n_s; ++a)
                for (std::size_t b = 0; b < n_s; ++b)
                    B(a, b) = Y(rs[a], ts[b]);
            ComplexMatrix M = cmatmul(cmatmul(cmatmul(B, gt_inv), hermitian(B)), gr_inv[ri]) * cd(c, 0.0);
            for (std::size_t i = 0; i < n_s; ++i)
                M(i, i) += 1.0;
            const double obj = log2_abs_det(M);
            if (obj > best.objective) {
                best.objective = obj;
                best.tx.assign(ts, ts + n_s);
                best.rx.assign(rs, rs + n_s);
            }
        }
    }
    return best;
}

ComplexMatrix inv_sqrt_hpd(const ComplexMatrix& G)
{
    const Svd d = svd(G);
    const std::size_t n = G.rows();
    ComplexMatrix out(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        if (!(d.S[k] > 0.0))
            throw SingularMatrixError("inv_sqrt_hpd: matrix is singular", std::numeric_limits<double>::infinity());
        const double w = 1.0 / std::sqrt(d.S[k]);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                out(i, j) += d.V(i, k) * w * std::conj(d.V(j, k));
    }
    return out;
}

double spectral_efficiency(const ComplexMatrix& H, const ComplexMatrix& F, const ComplexMatrix& W, double snr_db,
                           std::size_t n_s)
{
    const ComplexMatrix Hc = cmatmul(cmatmul(hermitian(W), H), F);
    const ComplexMatrix R = cmatmul(hermitian(W), W);
    ComplexMatrix M = cmatmul(inverse(R), cmatmul(Hc, hermitian(Hc))) * cd(snr_linear(snr_db) / n_s, 0.0);
    for (std::size_t i = 0; i < M.rows(); ++i)
        M(i, i) += 1.0;
    return log2_abs_det(M);
}

SuDigital su_digital(const ComplexMatrix& H, const ComplexMatrix& F_RF, const ComplexMatrix& W_RF, std::size_t n_s,
                     double snr_db, double P)
{
    if (P <= 0.0)
        P = static_cast<double>(n_s);
    if (n_s > F_RF.cols() || n_s > W_RF.cols())
        throw std::invalid_argument("su_digital: more streams than RF chains");
    const ComplexMatrix Gt_is = inv_sqrt_hpd(cmatmul(hermitian(F_RF), F_RF));
    const ComplexMatrix Gr_is = inv_sqrt_hpd(cmatmul(hermitian(W_RF), W_RF));
    const ComplexMatrix H_eff = cmatmul(cmatmul(hermitian(W_RF), H), F_RF);
    const Svd d = svd(cmatmul(cmatmul(Gr_is, H_eff), Gt_is));

    ComplexMatrix Vs(d.V.rows(), n_s), Us(d.U.rows(), n_s);
    for (std::size_t s = 0; s < n_s; ++s) {
        for (std::size_t i = 0; i < d.V.rows(); ++i)
            Vs(i, s) = d.V(i, s);
        for (std::size_t i = 0; i < d.U.rows(); ++i)
            Us(i, s) = d.U(i, s);
    }
    SuDigital out;
    out.F_BB = cmatmul(Gt_is, Vs) * cd(std::sqrt(P / static_cast<double>(n_s)), 0.0);
    out.W_BB = cmatmul(Gr_is, Us);
    out.singular_values.assign(d.S.begin(), d.S.end());
    out.spectral_efficiency =
        spectral_efficiency(H, cmatmul(F_RF, out.F_BB), cmatmul(W_RF, out.W_BB), snr_db, n_s);
    return out;
}

} // namespace wfm
