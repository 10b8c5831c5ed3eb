// SPDX-License-Identifier: Apache-2.0
#include "wfm/downstream.hpp"

#include <algorithm>
#include <cmath>

namespace wfm {

std::size_t visible_patch_count(double fraction, std::size_t n_patches, bool* clamped)
{
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw std::invalid_argument("partial CSI: visible fraction must lie in (0, 1]");
    const auto r = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n_patches)));
    if (clamped)
        *clamped = r == 0;
    return std::max<std::size_t>(1, std::min(r, n_patches));
}

std::vector<std::size_t> visible_patches(const PartialCsiSpec& spec, std::size_t n_patches)
{
    Rng rng(stream_seed(spec.seed, 0x7061727469616cULL));
    auto v = rng.sample_without_replacement(n_patches, visible_patch_count(spec.visible_fraction, n_patches));
    std::sort(v.begin(), v.end());
    return v;
}

Visibility partial_visibility(const TokenLayout& l, const std::vector<std::size_t>& visible)
{
    auto v = Visibility::all_visible(l);
    std::fill(v.csi_masked.begin(), v.csi_masked.end(), 1);
    for (auto i : visible)
        v.csi_masked.at(i) = 0;
    v.loc_masked = true;
    return v;
}

std::vector<double> encode_partial(const WfmModel<float>& model, const TokenBatch& tb,
                                   const std::vector<std::size_t>& visible)
{
    const auto e = model.encode(tb, partial_visibility(model.layout(), visible));
    return {e.physc.values().begin(), e.physc.values().end()};
}

std::vector<double> raw_partial_features(const TokenBatch& tb, const std::vector<std::size_t>& visible)
{
    std::vector<double> out;
    out.reserve(visible.size() * tb.csi_feat);
    for (auto i : visible)
        for (std::size_t f = 0; f < tb.csi_feat; ++f)
            out.push_back(tb.csi.at(i * tb.csi_feat + f));
    return out;
}

} // namespace wfm
