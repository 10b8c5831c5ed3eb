// SPDX-License-Identifier: Apache-2.0
//
// Hybrid analog/digital precoding.
//
// Multi-user: H is K x N_t with row k equal to h_k^H, where h_k is the
// user's CSI vector. Analog beams are codebook beams used directly as F_RF
// columns, so user k's gain on beam j is |h_k^H a_j|^2, the spectrum bin j
// of h_k. The baseband stage is regularized zero-forcing with one global
// power scale.
//
// Single-user: H is N_r x N_t; analog beams are chosen by exhaustive search
// over unordered index sets of the transmit and receive codebooks, then the
// baseband stage aligns with the dominant singular modes of the whitened
// effective channel.
#pragma once

#include "wfm/cmatrix.hpp"
#include "wfm/spectra.hpp"

#include <cstdint>
#include <vector>

namespace wfm {

// ---------------------------------------------------------------- multi-user

struct BeamSelection {
    std::vector<std::size_t> index;
    std::vector<bool> deep_nlos; // zero channel row
};

/// argmax_j |h_k^H a_j|^2 per user, lowest index on ties.
BeamSelection select_beams_mu(const ComplexMatrix& H, const Codebook& cb);

/// N_t x K matrix whose columns are the selected beams.
ComplexMatrix rf_from_beams(const Codebook& cb, const std::vector<std::size_t>& beams);

/// F_BB = beta H_eff^H (H_eff H_eff^H + alpha I)^-1 with beta chosen so that
/// ||F_RF F_BB||_F^2 = P. With alpha = 0 a singular Gram matrix raises
/// SingularMatrixError.
ComplexMatrix rzf_baseband(const ComplexMatrix& H_eff, double alpha, double P, const ComplexMatrix& F_RF);

struct RateReport {
    std::vector<double> sinr;
    double sum_rate = 0.0; // bits/s/Hz
};

RateReport sinr_sum_rate(const ComplexMatrix& H, const ComplexMatrix& F_RF, const ComplexMatrix& F_BB, double sigma2);

struct HybridSolution {
    ComplexMatrix F_RF, F_BB;
    std::vector<std::size_t> beam_indices;
    std::vector<double> sinr;
    double sum_rate = 0.0;
    bool duplicate_beams = false;
};

/// Noise power for a per-user receive SNR: sigma^2 = P (||H||_F^2 / K) / 10^(snr/10).
double noise_power_for_snr(const ComplexMatrix& H, double P, double snr_db);
/// 0.1 K sigma^2 / P.
double default_rzf_alpha(std::size_t K, double sigma2, double P);

/// Baseband stage and rates for a given beam assignment.
HybridSolution mu_solution_for_beams(const ComplexMatrix& H, const Codebook& cb, const std::vector<std::size_t>& beams,
                                     double alpha, double P, double sigma2);

/// Per-user power-maximizing beams followed by RZF. A local upper bound, not a
/// global optimum of the sum rate.
HybridSolution mu_upper_bound(const ComplexMatrix& H, const Codebook& cb, double alpha, double P, double sigma2);

// --------------------------------------------------------------- single-user

class SearchBudgetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

constexpr std::uint64_t kDefaultSuBudget = 1'000'000;

struct SuSelection {
    std::vector<std::size_t> tx, rx; // ascending
    double objective = 0.0;          // bits/s/Hz
};

/// log2 det(I + (snr/N_s) W^H H F (F^H F)^-1 F^H H^H W (W^H W)^-1).
double su_objective(const ComplexMatrix& H, const ComplexMatrix& F_RF, const ComplexMatrix& W_RF, double snr_db,
                    std::size_t n_s);

std::uint64_t binomial(std::uint64_t n, std::uint64_t k);

/// Exhaustive search over all C(N_tx, N_s) x C(N_rx, N_s) beam sets. Ties go
/// to the lexicographically smallest (tx, rx) index pair. Throws
/// SearchBudgetError when the candidate count exceeds `budget`.
SuSelection su_exhaustive(const ComplexMatrix& H, const Codebook& cb_tx, const Codebook& cb_rx, std::size_t n_s,
                          double snr_db, std::uint64_t budget = kDefaultSuBudget);

struct SuDigital {
    ComplexMatrix F_BB, W_BB;
    std::vector<double> singular_values; // of the whitened effective channel
    double spectral_efficiency = 0.0;
};

/// Digital stage on the N_RF x N_RF effective channel W_RF^H H F_RF.
/// F_BB = G_t^-1/2 V_s sqrt(P/N_s), W_BB = G_r^-1/2 U_s with G the analog Gram
/// matrices. P defaults to N_s, which makes the spectral efficiency equal to
/// the analog search objective when N_RF = N_s.
SuDigital su_digital(const ComplexMatrix& H, const ComplexMatrix& F_RF, const ComplexMatrix& W_RF, std::size_t n_s,
                     double snr_db, double P = 0.0);

/// log2 det(I + (snr/N_s) R^-1 W^H H F F^H H^H W) with R = W^H W, evaluated on
/// composed precoder F and combiner W.
double spectral_efficiency(const ComplexMatrix& H, const ComplexMatrix& F, const ComplexMatrix& W, double snr_db,
                           std::size_t n_s);

/// Inverse square root of a Hermitian positive-definite matrix.
ComplexMatrix inv_sqrt_hpd(const ComplexMatrix& G);

// --------------------------------------------------------------------- ECDF

struct Ecdf {
    std::vector<double> sorted;

    /// Linear-interpolation quantile (type 7), q in [0, 1].
    double quantile(double q) const;
    /// Fraction of values <= x.
    double cdf(double x) const;
};

Ecdf sum_rate_ecdf(std::vector<double> rates);

} // namespace wfm
