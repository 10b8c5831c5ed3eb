// SPDX-License-Identifier: Apache-2.0
#include "wfm/pretrain.hpp"

#include <algorithm>
#include <cmath>

namespace wfm {

const char* mask_variant_name(MaskVariant v)
{
    switch (v) {
    case MaskVariant::CsiLarge: return "csi-large";
    case MaskVariant::SceneLarge: return "scene-large";
    case MaskVariant::Moderate: return "moderate";
    }
    return "?";
}

VariantRatios variant_ratios(int stage, MaskVariant v)
{
    if (stage != 1 && stage != 2)
        throw std::invalid_argument("mask plan: stage must be 1 or 2, got " + std::to_string(stage));
    const bool s1 = stage == 1;
    switch (v) {
    case MaskVariant::CsiLarge:
        return {s1 ? RatioRange{0.5, 0.5} : RatioRange{0.7, 0.9}, {}};
    case MaskVariant::SceneLarge:
        return {{}, s1 ? RatioRange{0.1, 0.1} : RatioRange{0.2, 0.3}};
    case MaskVariant::Moderate:
        return {s1 ? RatioRange{0.3, 0.3} : RatioRange{0.5, 0.7}, s1 ? RatioRange{0.05, 0.05} : RatioRange{0.1, 0.2}};
    }
    throw std::invalid_argument("mask plan: unknown variant");
}

MaskContext mask_context(const Profile& p, const SceneMap& scene, const ChannelSample& s)
{
    MaskContext c;
    c.n_csi = p.csi_tokens();
    c.scene_p = p.scene_grid_patches();
    c.patch_m = static_cast<double>(p.scene_patch) * p.cell_m;
    c.tx_x = scene.bs.x;
    c.tx_y = scene.bs.y;
    c.rx_x = scene.bs.x + s.rx_x;
    c.rx_y = scene.bs.y + s.rx_y;
    return c;
}

Visibility MaskPlan::visibility(const TokenLayout& l) const
{
    auto v = Visibility::all_visible(l);
    for (auto i : csi)
        v.csi_masked.at(i) = 1;
    for (auto i : scene)
        v.scene_masked.at(i) = 1;
    v.loc_masked = loc_masked;
    return v;
}

namespace {

double draw(const RatioRange& r, Rng& rng)
{
    return r.lo == r.hi ? r.lo : rng.uniform(r.lo, r.hi);
}

} // namespace

MaskPlan make_mask_plan(int stage, MaskVariant variant, const MaskContext& ctx, Rng& rng)
{
    const auto ratios = variant_ratios(stage, variant);
    MaskPlan plan;
    plan.stage = stage;
    plan.variant = variant;
    plan.csi_ratio = draw(ratios.csi, rng);
    plan.scene_ratio = draw(ratios.scene, rng);
    if (plan.csi_ratio > 0.0) {
        plan.csi = rng.sample_without_replacement(ctx.n_csi, mask_count(plan.csi_ratio, ctx.n_csi));
        std::sort(plan.csi.begin(), plan.csi.end());
    }
    if (plan.scene_ratio > 0.0) {
        auto cm = corridor_mask(ctx.scene_p, ctx.patch_m, ctx.tx_x, ctx.tx_y, ctx.rx_x, ctx.rx_y, plan.scene_ratio, rng);
        plan.scene = std::move(cm.masked);
        plan.scene_candidates = std::move(cm.candidates);
    }
    if (stage == 2 && variant == MaskVariant::Moderate)
        plan.loc_masked = rng.bernoulli(kLocationMaskProbability);
    return plan;
}

double hard_probability(std::size_t epoch, std::size_t total_epochs, double stage1_fraction)
{
    if (total_epochs == 0)
        return 0.0;
    const double e = static_cast<double>(epoch), n = static_cast<double>(total_epochs);
    if (e < stage1_fraction * n)
        return 0.0;
    return std::min(1.0, e / n);
}

MaskPlan make_mask_plan(std::size_t epoch, std::size_t total_epochs, const MaskContext& ctx, Rng& rng,
                        double stage1_fraction)
{
    const int stage = rng.bernoulli(hard_probability(epoch, total_epochs, stage1_fraction)) ? 2 : 1;
    const auto variant = static_cast<MaskVariant>(rng.uniform_index(3));
    return make_mask_plan(stage, variant, ctx, rng);
}

} // namespace wfm
