// SPDX-License-Identifier: Apache-2.0
//
// Reference computations written independently of the library's linear
// algebra, used as test oracles.
#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace oracle {

using cd = std::complex<double>;
using CM = std::vector<std::vector<cd>>;

inline CM mm(const CM& a, const CM& b)
{
    CM c(a.size(), std::vector<cd>(b[0].size()));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t k = 0; k < b.size(); ++k)
            for (std::size_t j = 0; j < b[0].size(); ++j)
                c[i][j] += a[i][k] * b[k][j];
    return c;
}

inline CM herm(const CM& a)
{
    CM c(a[0].size(), std::vector<cd>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[0].size(); ++j)
            c[j][i] = std::conj(a[i][j]);
    return c;
}

/// Gauss-Jordan with full row scan for the largest pivot.
inline CM inv(CM a)
{
    const std::size_t n = a.size();
    CM e(n, std::vector<cd>(n));
    for (std::size_t i = 0; i < n; ++i)
        e[i][i] = 1.0;
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(a[r][c]) > std::abs(a[piv][c]))
                piv = r;
        if (std::abs(a[piv][c]) == 0.0)
            throw std::runtime_error("oracle::inv: singular");
        std::swap(a[c], a[piv]);
        std::swap(e[c], e[piv]);
        const cd d = a[c][c];
        for (std::size_t j = 0; j < n; ++j) {
            a[c][j] /= d;
            e[c][j] /= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == c)
                continue;
            const cd f = a[r][c];
            for (std::size_t j = 0; j < n; ++j) {
                a[r][j] -= f * a[c][j];
                e[r][j] -= f * e[c][j];
            }
        }
    }
    return e;
}

inline cd det(CM a)
{
    const std::size_t n = a.size();
    cd d = 1.0;
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(a[r][c]) > std::abs(a[piv][c]))
                piv = r;
        if (piv != c) {
            std::swap(a[c], a[piv]);
            d = -d;
        }
        d *= a[c][c];
        if (std::abs(a[c][c]) == 0.0)
            return 0.0;
        for (std::size_t r = c + 1; r < n; ++r) {
            const cd f = a[r][c] / a[c][c];
            for (std::size_t j = c; j < n; ++j)
                a[r][j] -= f * a[c][j];
        }
    }
    return d;
}

/// log2 det(I + (snr/N_s) (W^H W)^-1 W^H H F (F^H F)^-1 F^H H^H W).
inline double su_objective(const CM& H, const CM& F, const CM& W, double snr_db, std::size_t ns)
{
    const double snr = std::pow(10.0, snr_db / 10.0) / static_cast<double>(ns);
    const CM HF = mm(H, F);
    const CM PF = mm(mm(HF, inv(mm(herm(F), F))), herm(HF));
    CM M = mm(mm(inv(mm(herm(W), W)), herm(W)), mm(PF, W));
    for (std::size_t i = 0; i < ns; ++i) {
        for (std::size_t j = 0; j < ns; ++j)
            M[i][j] *= snr;
        M[i][i] += 1.0;
    }
    return std::log2(std::real(det(M)));
}

/// All k-subsets of [0, n) in lexicographic order.
inline std::vector<std::vector<std::size_t>> subsets(std::size_t n, std::size_t k)
{
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::size_t> cur;
    auto rec = [&](auto&& self, std::size_t start) -> void {
        if (cur.size() == k) {
            out.push_back(cur);
            return;
        }
        for (std::size_t i = start; i < n; ++i) {
            cur.push_back(i);
            self(self, i + 1);
            cur.pop_back();
        }
    };
    rec(rec, 0);
    return out;
}

struct SuBest {
    std::vector<std::size_t> tx, rx;
    double objective = -INFINITY;
};

/// Brute-force search; beams are given as rows (tx: N_tx x N_t, rx: N_rx x N_r).
inline SuBest su_brute_force(const CM& H, const CM& tx_beams, const CM& rx_beams, std::size_t ns, double snr_db)
{
    auto columns = [](const CM& beams, const std::vector<std::size_t>& idx) {
        CM m(beams[0].size(), std::vector<cd>(idx.size()));
        for (std::size_t c = 0; c < idx.size(); ++c)
            for (std::size_t r = 0; r < beams[0].size(); ++r)
                m[r][c] = beams[idx[c]][r];
        return m;
    };
    SuBest best;
    for (const auto& ts : subsets(tx_beams.size(), ns))
        for (const auto& rs : subsets(rx_beams.size(), ns)) {
            const double v = su_objective(H, columns(tx_beams, ts), columns(rx_beams, rs), snr_db, ns);
            if (v > best.objective) {
                best.objective = v;
                best.tx = ts;
                best.rx = rs;
            }
        }
    return best;
}

/// DFT beam (k_x, k_y) of an n_x x n_y array, flattened n + m*n_x.
inline std::vector<cd> dft_beam(std::size_t nx, std::size_t ny, std::size_t kx, std::size_t ky)
{
    std::vector<cd> a(nx * ny);
    for (std::size_t m = 0; m < ny; ++m)
        for (std::size_t n = 0; n < nx; ++n) {
            const double ph = -2.0 * M_PI * (double(kx * n) / double(nx) + double(ky * m) / double(ny));
            a[n + m * nx] = std::polar(1.0, ph);
        }
    return a;
}

inline CM dft_beams(std::size_t nx, std::size_t ny)
{
    CM out;
    for (std::size_t kx = 0; kx < nx; ++kx)
        for (std::size_t ky = 0; ky < ny; ++ky)
            out.push_back(dft_beam(nx, ny, kx, ky));
    return out;
}

} // namespace oracle
