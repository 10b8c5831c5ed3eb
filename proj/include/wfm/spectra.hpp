// SPDX-License-Identifier: Apache-2.0
//
// DFT beam codebooks for uniform planar arrays and spatial spectra.
//
// Beam j corresponds to spatial frequencies (k_x, k_y) = (j / n_y, j % n_y) with
// entries a_j(n, m) = exp(-j 2 pi (k_x n / n_x + k_y m / n_y)), flattened
// column-wise like the steering vectors (index n + m*n_x). Spectrum bin j is
// |a_j^H h|^2, so bins and beam indices share one coordinate system.
#pragma once

#include "wfm/cmatrix.hpp"

#include <utility>
#include <vector>

namespace wfm {

struct Codebook {
    std::size_t n_x = 0, n_y = 0;
    ComplexMatrix beams; // N_c x N_t, row j is a_j

    std::size_t size() const { return beams.rows(); }
    std::size_t n_t() const { return beams.cols(); }
    std::vector<cd> beam(std::size_t j) const { return beams.row(j); }
    std::pair<std::size_t, std::size_t> kxky(std::size_t j) const { return {j / n_y, j % n_y}; }
    std::size_t index(std::size_t kx, std::size_t ky) const { return kx * n_y + ky; }
};

Codebook dft_codebook(std::size_t n_x, std::size_t n_y);

/// |a_j^H h|^2 for every beam, computed with a separable 2D DFT.
std::vector<double> spatial_spectrum(const std::vector<cd>& h, std::size_t n_x, std::size_t n_y);

/// Same quantity by direct inner products against the codebook.
std::vector<double> spatial_spectrum_direct(const std::vector<cd>& h, const Codebook& cb);

/// Non-overlapping block means of an (in_x, in_y) grid stored row-major
/// (index kx*in_y + ky) down to (out_x, out_y).
std::vector<double> coarsen_spectrum(const std::vector<double>& s, std::size_t in_x, std::size_t in_y,
                                     std::size_t out_x, std::size_t out_y);

/// Codebook bin whose beam best matches the steering vector a_t(u) of a unit
/// direction u (u_x, u_z are the components along the array axes).
std::size_t direction_bin(std::size_t n_x, std::size_t n_y, double spacing, double ux, double uz);

} // namespace wfm
