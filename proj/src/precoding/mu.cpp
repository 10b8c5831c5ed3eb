// SPDX-License-Identifier: Apache-2.0
#include "wfm/precoding.hpp"

#include <cmath>
#include <set>

namespace wfm {

BeamSelection select_beams_mu(const ComplexMatrix& H, const Codebook& cb)
{
    if (H.cols() != cb.n_t())
        throw std::invalid_argument("select_beams_mu: channel has " + std::to_string(H.cols()) +
                                    " antennas, codebook " + std::to_string(cb.n_t()));
    BeamSelection sel;
    for (std::size_t k = 0; k < H.rows(); ++k) {
        // Row k is h_k^H, so h_k^H a_j = sum_i H(k,i) a_j(i).
        double best = -1.0;
        std::size_t arg = 0;
        for (std::size_t j = 0; j < cb.size(); ++j) {
            cd s = 0.0;
            for (std::size_t i = 0; i < H.cols(); ++i)
                s += H(k, i) * cb.beams(j, i);
            const double g = std::norm(s);
            if (g > best) {
                best = g;
                arg = j;
            }
        }
        sel.index.push_back(arg);
        sel.deep_nlos.push_back(best == 0.0);
    }
    return sel;
}

ComplexMatrix rf_from_beams(const Codebook& cb, const std::vector<std::size_t>& beams)
{
    ComplexMatrix f(cb.n_t(), beams.size());
    for (std::size_t c = 0; c < beams.size(); ++c) {
        if (beams[c] >= cb.size())
            throw std::invalid_argument("rf_from_beams: beam index " + std::to_string(beams[c]) + " out of range");
        for (std::size_t i = 0; i < cb.n_t(); ++i)
            f(i, c) = cb.beams(beams[c], i);
    }
    return f;
}

ComplexMatrix rzf_baseband(const ComplexMatrix& H_eff, double alpha, double P, const ComplexMatrix& F_RF)
{
    if (alpha < 0.0)
        throw std::invalid_argument("rzf_baseband: alpha must be non-negative");
    if (!(P > 0.0))
        throw std::invalid_argument("rzf_baseband: power must be positive");
    const std::size_t K = H_eff.rows();
    ComplexMatrix gram = cmatmul(H_eff, hermitian(H_eff));
    for (std::size_t i = 0; i < K; ++i)
        gram(i, i) += alpha;
    ComplexMatrix inv;
    try {
        inv = inverse(gram);
    } catch (const SingularMatrixError& e) {
        throw SingularMatrixError(std::string(e.what()) +
                                      "; the effective channel Gram matrix is singular, use a regularizer alpha > 0",
                                  e.condition_estimate());
    }
    ComplexMatrix g = cmatmul(hermitian(H_eff), inv);
    const double power = frobenius_norm_sq(cmatmul(F_RF, g));
    if (!(power > 0.0))
        return ComplexMatrix(g.rows(), g.cols());
    return g * cd(std::sqrt(P / power), 0.0);
}

RateReport sinr_sum_rate(const ComplexMatrix& H, const ComplexMatrix& F_RF, const ComplexMatrix& F_BB, double sigma2)
{
    const ComplexMatrix G = cmatmul(cmatmul(H, F_RF), F_BB); // G(k, j) = h_k^H F_RF f_BB,j
    if (G.rows() != G.cols())
        throw std::invalid_argument("sinr_sum_rate: expected one stream per user");
    RateReport r;
    for (std::size_t k = 0; k < G.rows(); ++k) {
        const double sig = std::norm(G(k, k));
        double interf = 0.0;
        for (std::size_t j = 0; j < G.cols(); ++j)
            if (j != k)
                interf += std::norm(G(k, j));
        const double s = sig / (interf + sigma2);
        r.sinr.push_back(s);
        r.sum_rate += std::log2(1.0 + s);
    }
    return r;
}

double noise_power_for_snr(const ComplexMatrix& H, double P, double snr_db)
{
    const double per_user = frobenius_norm_sq(H) / static_cast<double>(H.rows());
    return P * per_user / std::pow(10.0, snr_db / 10.0);
}

double default_rzf_alpha(std::size_t K, double sigma2, double P)
{
    return 0.1 * static_cast<double>(K) * sigma2 / P;
}

HybridSolution mu_solution_for_beams(const ComplexMatrix& H, const Codebook& cb, const std::vector<std::size_t>& beams,
                                     double alpha, double P, double sigma2)
{
    HybridSolution s;
    s.beam_indices = beams;
    s.duplicate_beams = std::set<std::size_t>(beams.begin(), beams.end()).size() != beams.size();
    s.F_RF = rf_from_beams(cb, beams);
    s.F_BB = rzf_baseband(cmatmul(H, s.F_RF), alpha, P, s.F_RF);
    const auto r = sinr_sum_rate(H, s.F_RF, s.F_BB, sigma2);
    s.sinr = r.sinr;
    s.sum_rate = r.sum_rate;
    return s;
}

HybridSolution mu_upper_bound(const ComplexMatrix& H, const Codebook& cb, double alpha, double P, double sigma2)
{
    return mu_solution_for_beams(H, cb, select_beams_mu(H, cb).index, alpha, P, sigma2);
}

} // namespace wfm
