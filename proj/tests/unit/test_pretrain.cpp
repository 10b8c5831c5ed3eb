// SPDX-License-Identifier: Apache-2.0
#include "wfm/pretrain.hpp"
#include "wfm/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>
#include <unistd.h>

using namespace wfm;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

using TD = Tensor<double>;

TD row(std::vector<double> v)
{
    const std::size_t n = v.size();
    return TD({1, n}, std::move(v));
}

/// re/im pair from polar form.
std::vector<double> reim(double mag, double phase)
{
    return {mag * std::cos(phase), mag * std::sin(phase)};
}

MaskContext paper_context()
{
    MaskContext c;
    c.n_csi = 64;
    c.scene_p = 20;
    c.patch_m = 10.0;
    c.tx_x = 100.0;
    c.tx_y = 0.5;
    c.rx_x = 60.0;
    c.rx_y = 140.0;
    return c;
}

fs::path scratch(const std::string& name)
{
    const auto d = fs::temp_directory_path() / ("wfm_unit_" + std::to_string(::getpid()) + "_" + name);
    fs::remove_all(d);
    return d;
}

const Dataset& tiny_dataset()
{
    static const Dataset ds = generate_dataset(make_manifest(desk_profile(), 2, 8, 1, 3));
    return ds;
}

std::vector<std::size_t> all_ids(const Dataset& ds)
{
    std::vector<std::size_t> ids(ds.samples.size());
    for (std::size_t i = 0; i < ids.size(); ++i)
        ids[i] = i;
    return ids;
}

std::vector<float> flat_params(const WfmModel<float>& m)
{
    std::vector<float> out;
    for (const auto& [n, t] : m.params().items())
        out.insert(out.end(), t.values().begin(), t.values().end());
    return out;
}

} // namespace

TEST_SUITE("pretrain")
{
    TEST_CASE("mask plan examples")
    {
        const auto ctx = paper_context();
        Rng rng(1);
        const auto a = make_mask_plan(1, MaskVariant::CsiLarge, ctx, rng);
        CHECK(a.csi.size() == 32);
        CHECK(a.scene.empty());
        CHECK_FALSE(a.loc_masked);

        const auto b = make_mask_plan(1, MaskVariant::Moderate, ctx, rng);
        CHECK(b.scene.size() == 20);
        auto cand = b.scene_candidates;
        std::sort(cand.begin(), cand.end());
        CHECK(std::includes(cand.begin(), cand.end(), b.scene.begin(), b.scene.end()));

        Rng r1(42), r2(42);
        for (int t = 0; t < 20; ++t) {
            const auto p1 = make_mask_plan(static_cast<std::size_t>(t), 20, ctx, r1);
            const auto p2 = make_mask_plan(static_cast<std::size_t>(t), 20, ctx, r2);
            CHECK(p1.csi == p2.csi);
            CHECK(p1.scene == p2.scene);
            CHECK(p1.loc_masked == p2.loc_masked);
        }
        CHECK_THROWS_AS(variant_ratios(3, MaskVariant::CsiLarge), std::invalid_argument);
    }

    TEST_CASE("stage-2 ratios stay inside their ranges")
    {
        const auto ctx = paper_context();
        Rng rng(2);
        for (int t = 0; t < 300; ++t) {
            const auto v = static_cast<MaskVariant>(t % 3);
            const auto p = make_mask_plan(2, v, ctx, rng);
            const auto r = variant_ratios(2, v);
            CHECK(p.csi_ratio >= r.csi.lo);
            CHECK(p.csi_ratio <= r.csi.hi);
            CHECK(p.scene_ratio >= r.scene.lo);
            CHECK(p.scene_ratio <= r.scene.hi);
            std::vector<std::size_t> csi = p.csi;
            CHECK(std::is_sorted(csi.begin(), csi.end()));
            CHECK(std::adjacent_find(csi.begin(), csi.end()) == csi.end());
            if (v != MaskVariant::Moderate)
                CHECK_FALSE(p.loc_masked);
        }
    }

    TEST_CASE("curriculum schedule")
    {
        CHECK(hard_probability(0, 10, 0.2) == 0.0);
        CHECK(hard_probability(1, 10, 0.2) == 0.0);
        CHECK(hard_probability(2, 10, 0.2) == doctest::Approx(0.2));
        CHECK(hard_probability(9, 10, 0.2) == doctest::Approx(0.9));
        const auto ctx = paper_context();
        Rng rng(3);
        for (int t = 0; t < 200; ++t)
            CHECK(make_mask_plan(1, 10, ctx, rng).stage == 1);

        CHECK(cosine_lr(1e-3, 0, 100) == doctest::Approx(1e-3));
        CHECK(cosine_lr(1e-3, 50, 100) == doctest::Approx(5e-4));
        CHECK(cosine_lr(1e-3, 100, 100) == doctest::Approx(0.0));
    }

    TEST_CASE("CSI loss examples")
    {
        const auto t = row(reim(1.0, 0.0));
        CHECK(loss_csi(t, t).item() == 0.0);
        CHECK(loss_csi(row(reim(1.3, 0.4)), t).item() == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(loss_csi(row(reim(2.0, kPi - 0.1)), row(reim(2.0, -kPi + 0.1))).item() ==
              doctest::Approx(0.2).epsilon(1e-9));
        CHECK(loss_csi(row(reim(2.0, kPi - 0.1)), row(reim(2.0, -kPi + 0.1)), true).item() ==
              doctest::Approx(2 * kPi - 0.2).epsilon(1e-9));
        CHECK(loss_csi(TD({0, 4}, {}), TD({0, 4}, {})).item() == 0.0);
        CHECK_THROWS_AS(loss_csi(TD({4}, {1, 2, 3, 4}), TD({4}, {1, 2, 3, 4})), ShapeError);

        Rng rng(4);
        for (int k = 0; k < 50; ++k) {
            std::vector<double> a(12), b(12);
            for (auto& x : a)
                x = rng.normal();
            for (auto& x : b)
                x = rng.normal();
            CHECK(loss_csi(TD({2, 6}, a), TD({2, 6}, b)).item() >= 0.0);
        }
    }

    TEST_CASE("location loss examples and batch mean")
    {
        CHECK(loss_loc(row({0, 0}), row({3, 4})).item() == doctest::Approx(5.0));
        CHECK(loss_loc(row({0.1, 0.2}), row({0.1, 0.2})).item() == 0.0);
        Rng rng(5);
        std::vector<double> p(20), t(20);
        for (auto& x : p)
            x = rng.uniform(-1, 1);
        for (auto& x : t)
            x = rng.uniform(-1, 1);
        double mean = 0.0;
        for (std::size_t i = 0; i < 10; ++i)
            mean += std::hypot(p[2 * i] - t[2 * i], p[2 * i + 1] - t[2 * i + 1]) / 10.0;
        CHECK(loss_loc(TD({10, 2}, p), TD({10, 2}, t)).item() == doctest::Approx(mean).epsilon(1e-12));
    }

    TEST_CASE("occupancy loss examples")
    {
        CHECK(loss_occ(TD({1, 1}, {20.0}), TD({1, 1}, {1.0})).item() == doctest::Approx(std::log1p(std::exp(-20.0))).epsilon(1e-6));
        CHECK(loss_occ(TD({1, 1}, {20.0}), TD({1, 1}, {1.0})).item() < 3e-9);
        CHECK(loss_occ(TD({2, 1}, {0.0, 0.0}), TD({2, 1}, {0.0, 1.0})).item() == doctest::Approx(std::log(2.0)));
        CHECK(loss_occ(TD({4, 1}, {25, -25, 30, -30}), TD({4, 1}, {1, 0, 1, 0})).item() < 1e-6);
    }

    TEST_CASE("spectrum loss examples")
    {
        const TD s({1, 4}, {0.5, 1.0, 2.0, 4.0});
        CHECK(loss_spectrum(s, s, 0.5, 1e-6).item() == 0.0);
        const TD p({1, 4}, {1.0, 0.0, 2.5, 3.0});
        double mse = 0.0;
        for (std::size_t i = 0; i < 4; ++i)
            mse += std::pow(p.at(i) - s.at(i), 2) / 4.0;
        CHECK(loss_spectrum(p, s, 1.0, 1e-6).item() == doctest::Approx(std::sqrt(mse)).epsilon(1e-12));
        const TD e = scale(s, std::exp(1.0));
        CHECK(loss_spectrum(e, s, 0.0, 1e-12).item() == doctest::Approx(1.0).epsilon(1e-9));
    }

    TEST_CASE("total loss combines present components linearly")
    {
        LossComponents<double> none;
        CHECK_THROWS(total_loss(none, LossWeights{}));
        LossComponents<double> one;
        one.loc = TD::scalar(0.7);
        CHECK(total_loss(one, LossWeights{}).item() == doctest::Approx(0.7));

        LossComponents<double> c;
        c.csi = TD::scalar(0.3);
        c.occ = TD::scalar(1.1);
        c.spec = TD::scalar(0.25);
        LossWeights w{0.5, 2.0, 1.5, 3.0};
        const double base = total_loss(c, w).item();
        CHECK(base == doctest::Approx(0.5 * 0.3 + 1.5 * 1.1 + 3.0 * 0.25));
        LossWeights w2 = w;
        w2.csi *= 2;
        w2.loc *= 2;
        w2.occ *= 2;
        w2.spec *= 2;
        CHECK(total_loss(c, w2).item() == doctest::Approx(2.0 * base));
    }

    TEST_CASE("Adam first step moves each coordinate by the learning rate")
    {
        ParameterSet<double> ps;
        Rng rng(6);
        auto x = ps.create("x", {3}, Init::Zeros, rng);
        sum(mul(x, TD({3}, {2.0, -5.0, 0.5}))).backward();
        AdamConfig cfg;
        cfg.clip_norm = 0.0;
        Adam<double> opt(ps, cfg);
        opt.step(0.1);
        const auto v = ps.get("x").values();
        CHECK(v[0] == doctest::Approx(-0.1).epsilon(1e-6));
        CHECK(v[1] == doctest::Approx(0.1).epsilon(1e-6));
        CHECK(v[2] == doctest::Approx(-0.1).epsilon(1e-6));
        CHECK(opt.steps() == 1);
    }

    TEST_CASE("zero learning rate leaves parameters unchanged")
    {
        const auto& ds = tiny_dataset();
        WfmModel<float> m(ds.manifest.profile, 1);
        const auto before = flat_params(m);
        TrainConfig cfg;
        cfg.epochs = 1;
        cfg.batch_size = 4;
        cfg.adam.lr = 0.0;
        const auto st = train(m, ds, all_ids(ds), cfg);
        CHECK(st.epoch == 1);
        CHECK(flat_params(m) == before);
        CHECK(std::isfinite(st.history.at(0).total));
    }

    TEST_CASE("resumed training matches an uninterrupted run bit for bit")
    {
        const auto& ds = tiny_dataset();
        TrainConfig cfg;
        cfg.epochs = 4;
        cfg.batch_size = 4;
        cfg.seed = 9;

        WfmModel<float> ref(ds.manifest.profile, 2);
        cfg.out_dir = scratch("ref");
        const auto full = train(ref, ds, all_ids(ds), cfg);

        cfg.out_dir = scratch("resume");
        WfmModel<float> first(ds.manifest.profile, 2);
        cfg.stop_after = 2;
        CHECK(train(first, ds, all_ids(ds), cfg).epoch == 2);
        cfg.stop_after = 0;
        WfmModel<float> second(ds.manifest.profile, 2);
        const auto resumed = train(second, ds, all_ids(ds), cfg);

        REQUIRE(resumed.history.size() == full.history.size());
        for (std::size_t e = 0; e < full.history.size(); ++e) {
            CHECK(resumed.history[e].total == full.history[e].total);
            CHECK(resumed.history[e].csi == full.history[e].csi);
        }
        CHECK(flat_params(second) == flat_params(ref));
        fs::remove_all(scratch("ref"));
        fs::remove_all(cfg.out_dir);
    }

    TEST_CASE("non-finite parameters abort training")
    {
        const auto& ds = tiny_dataset();
        WfmModel<float> m(ds.manifest.profile, 3);
        for (auto& [name, t] : m.params().items())
            if (name == "head.csi.w")
                t.mutable_values()[0] = std::numeric_limits<float>::quiet_NaN();
        TrainConfig cfg;
        cfg.epochs = 1;
        cfg.batch_size = 4;
        CHECK_THROWS_AS(train(m, ds, all_ids(ds), cfg), TrainingDivergedError);
    }

    TEST_CASE("spectrum target has one non-negative value per coarse cell")
    {
        const auto& ds = tiny_dataset();
        const auto& p = ds.manifest.profile;
        for (std::size_t i = 0; i < 4; ++i) {
            const auto t = spectrum_target(ds.samples[i], p, ds.manifest.csi_rms);
            CHECK(t.size() == p.coarse_x * p.coarse_y);
            for (float v : t)
                CHECK(v >= 0.0f);
        }
    }
}
