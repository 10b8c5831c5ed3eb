// SPDX-License-Identifier: Apache-2.0
#include "wfm/precoding.hpp"

#include <algorithm>
#include <cmath>

namespace wfm {

Ecdf sum_rate_ecdf(std::vector<double> rates)
{
    if (rates.empty())
        throw std::invalid_argument("sum_rate_ecdf: no rates");
    std::sort(rates.begin(), rates.end());
    return Ecdf{std::move(rates)};
}

double Ecdf::quantile(double q) const
{
    if (sorted.empty())
        throw std::invalid_argument("Ecdf::quantile: empty");
    q = std::clamp(q, 0.0, 1.0);
    const double h = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double Ecdf::cdf(double x) const
{
    const auto it = std::upper_bound(sorted.begin(), sorted.end(), x);
    return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
}

} // namespace wfm
