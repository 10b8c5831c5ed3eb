// SPDX-License-Identifier: Apache-2.0
#include "wfm/spectra.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace wfm {

Codebook dft_codebook(std::size_t n_x, std::size_t n_y)
{
    if (n_x == 0 || n_y == 0)
        throw std::invalid_argument("dft_codebook: array dimensions must be positive");
    Codebook cb;
    cb.n_x = n_x;
    cb.n_y = n_y;
    const std::size_t nt = n_x * n_y;
    cb.beams = ComplexMatrix(nt, nt);
    for (std::size_t j = 0; j < nt; ++j) {
        const auto [kx, ky] = cb.kxky(j);
        for (std::size_t m = 0; m < n_y; ++m)
            for (std::size_t n = 0; n < n_x; ++n) {
                // Exact rational phase: (kx n / n_x + ky m / n_y) reduced mod 1.
                const std::size_t num = ((kx * n) % n_x) * n_y + ((ky * m) % n_y) * n_x;
                const double frac = static_cast<double>(num % (n_x * n_y)) / static_cast<double>(n_x * n_y);
                cb.beams(j, n + m * n_x) = std::polar(1.0, -2.0 * std::numbers::pi * frac);
            }
    }
    return cb;
}

std::vector<double> spatial_spectrum(const std::vector<cd>& h, std::size_t n_x, std::size_t n_y)
{
    if (h.size() != n_x * n_y)
        throw std::invalid_argument("spatial_spectrum: channel length " + std::to_string(h.size()) +
                                    " does not match " + std::to_string(n_x) + "x" + std::to_string(n_y));
    const auto fx = dft_matrix(n_x);
    const auto fy = dft_matrix(n_y);
    // Y = F_x G F_y^T with G[n][m] = h[n + m n_x]
    ComplexMatrix t(n_x, n_y);
    for (std::size_t kx = 0; kx < n_x; ++kx)
        for (std::size_t m = 0; m < n_y; ++m) {
            cd s = 0.0;
            for (std::size_t n = 0; n < n_x; ++n)
                s += fx(kx, n) * h[n + m * n_x];
            t(kx, m) = s;
        }
    ComplexMatrix y(n_x, n_y);
    for (std::size_t kx = 0; kx < n_x; ++kx)
        for (std::size_t ky = 0; ky < n_y; ++ky) {
            cd s = 0.0;
            for (std::size_t m = 0; m < n_y; ++m)
                s += t(kx, m) * fy(ky, m);
            y(kx, ky) = s;
        }
    // a_j^H h uses the positive-sign kernel, i.e. the mirrored DFT bin.
    std::vector<double> out(n_x * n_y);
    for (std::size_t kx = 0; kx < n_x; ++kx)
        for (std::size_t ky = 0; ky < n_y; ++ky)
            out[kx * n_y + ky] = std::norm(y((n_x - kx) % n_x, (n_y - ky) % n_y));
    return out;
}

std::vector<double> spatial_spectrum_direct(const std::vector<cd>& h, const Codebook& cb)
{
    if (h.size() != cb.n_t())
        throw std::invalid_argument("spatial_spectrum_direct: length mismatch");
    std::vector<double> out(cb.size());
    for (std::size_t j = 0; j < cb.size(); ++j) {
        cd s = 0.0;
        for (std::size_t i = 0; i < h.size(); ++i)
            s += std::conj(cb.beams(j, i)) * h[i];
        out[j] = std::norm(s);
    }
    return out;
}

std::vector<double> coarsen_spectrum(const std::vector<double>& s, std::size_t in_x, std::size_t in_y,
                                     std::size_t out_x, std::size_t out_y)
{
    if (s.size() != in_x * in_y)
        throw std::invalid_argument("coarsen_spectrum: spectrum size does not match grid");
    if (out_x == 0 || out_y == 0 || in_x % out_x != 0 || in_y % out_y != 0)
        throw std::invalid_argument("coarsen_spectrum: output " + std::to_string(out_x) + "x" +
                                    std::to_string(out_y) + " does not divide " + std::to_string(in_x) + "x" +
                                    std::to_string(in_y));
    const std::size_t bx = in_x / out_x, by = in_y / out_y;
    std::vector<double> out(out_x * out_y, 0.0);
    for (std::size_t ox = 0; ox < out_x; ++ox)
        for (std::size_t oy = 0; oy < out_y; ++oy) {
            double sum = 0.0;
            for (std::size_t dx = 0; dx < bx; ++dx)
                for (std::size_t dy = 0; dy < by; ++dy)
                    sum += s[(ox * bx + dx) * in_y + oy * by + dy];
            out[ox * out_y + oy] = sum / static_cast<double>(bx * by);
        }
    return out;
}

std::size_t direction_bin(std::size_t n_x, std::size_t n_y, double spacing, double ux, double uz)
{
    auto wrap = [](double v, std::size_t n) {
        const auto k = static_cast<long long>(std::llround(v));
        const auto nn = static_cast<long long>(n);
        return static_cast<std::size_t>(((k % nn) + nn) % nn);
    };
    const std::size_t kx = wrap(static_cast<double>(n_x) * spacing * ux, n_x);
    const std::size_t ky = wrap(static_cast<double>(n_y) * spacing * uz, n_y);
    return kx * n_y + ky;
}

} // namespace wfm
