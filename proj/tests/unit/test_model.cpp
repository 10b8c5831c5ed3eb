// SPDX-License-Identifier: Apache-2.0
#include "wfm/model.hpp"
#include "wfm/pretrain.hpp"
#include "wfm/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

using namespace wfm;

namespace {

std::vector<cd> random_row(Rng& rng, std::size_t n)
{
    std::vector<cd> v(n);
    for (auto& z : v)
        z = {rng.normal(), rng.normal()};
    return v;
}

template <typename T>
Tensor<T> random_like(Rng& rng, const Shape& shape, double lo, double hi)
{
    std::vector<T> v(shape_numel(shape));
    for (auto& x : v)
        x = static_cast<T>(rng.uniform(lo, hi));
    return Tensor<T>(shape, v);
}

struct Fixture {
    Profile p = desk_profile();
    SceneMap scene = generate_scene(3, p, 0.3);
    Normalization norm = make_normalization(p, 1.0);
    Rng rng{11};
    TokenBatch tb = tokenize(random_row(rng, p.n_t()), scene, 40.0, 120.0, p, norm);
};

Visibility partial(const TokenLayout& l, bool loc_masked)
{
    auto v = Visibility::all_visible(l);
    for (std::size_t i = 0; i < l.n_csi; i += 3)
        v.csi_masked[i] = 1;
    for (std::size_t i = 1; i < l.n_scene; i += 4)
        v.scene_masked[i] = 1;
    v.loc_masked = loc_masked;
    return v;
}

template <typename T>
LossComponents<T> all_losses(const Decoded<T>& d, Rng& rng)
{
    LossComponents<T> c;
    c.csi = loss_csi(d.csi, random_like<T>(rng, d.csi.shape(), -1.0, 1.0));
    c.occ = loss_occ(d.occ, random_like<T>(rng, d.occ.shape(), 0.0, 1.0));
    if (d.loc.defined())
        c.loc = loss_loc(d.loc, random_like<T>(rng, d.loc.shape(), -1.0, 1.0));
    c.spec = loss_spectrum(d.physc_map, random_like<T>(rng, d.physc_map.shape(), 0.1, 2.0), 0.5, 1e-6);
    return c;
}

} // namespace

TEST_SUITE("model")
{
    TEST_CASE("token counts and layout")
    {
        const auto d = token_layout(desk_profile());
        CHECK(d.n_csi == 16);
        CHECK(d.n_scene == 16);
        const auto pp = token_layout(paper_profile());
        CHECK(pp.n_csi == 64);
        CHECK(pp.n_scene == 400);
        CHECK(pp.length() == 468);

        const auto k = d.kinds();
        REQUIRE(k.size() == d.length());
        CHECK(k[0] == TokenKind::Physc);
        CHECK(k[d.csi_pos(0)] == TokenKind::Csi);
        CHECK(k[d.csi_pos(15)] == TokenKind::Csi);
        CHECK(k[d.csi_pos(15) + 1] == TokenKind::Sep);
        CHECK(k[d.scene_pos(0)] == TokenKind::Scene);
        CHECK(k[d.loc_pos() - 1] == TokenKind::Sep);
        CHECK(k[d.loc_pos()] == TokenKind::Loc);
    }

    TEST_CASE("location normalization round trip")
    {
        const auto n = make_normalization(desk_profile(), 1.0);
        for (auto [x, y] : {std::pair{0.0, 0.0}, {-97.5, 197.5}, {12.3, 45.6}}) {
            const auto u = normalize_location(n, x, y);
            CHECK(std::abs(u[0]) <= 1.0);
            CHECK(std::abs(u[1]) <= 1.0);
            const auto b = denormalize_location(n, u[0], u[1]);
            CHECK(b[0] == doctest::Approx(x).epsilon(1e-12));
            CHECK(b[1] == doctest::Approx(y).epsilon(1e-12));
        }
    }

    TEST_CASE("CSI patches cover every antenna exactly once")
    {
        for (const auto& p : {desk_profile(), paper_profile()}) {
            std::vector<int> seen(p.n_t(), 0);
            for (std::size_t i = 0; i < p.csi_tokens(); ++i)
                for (auto a : csi_patch_antennas(p, i))
                    ++seen[a];
            CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
        }
    }

    TEST_CASE("parameter counts")
    {
        const WfmModel<float> paper(paper_profile(), 1);
        const double n = static_cast<double>(paper.params().count());
        CHECK(std::abs(n - 2.4e6) <= 0.2 * 2.4e6);
        CHECK(paper.params().count() == 2390724);
        CHECK(WfmModel<float>(desk_profile(), 1).params().count() == 61996);
    }

    TEST_CASE("construction and forward pass are deterministic")
    {
        Fixture f;
        const WfmModel<double> a(f.p, 5), b(f.p, 5), c(f.p, 6);
        CHECK(a.params().items().size() == b.params().items().size());
        bool differs = false;
        for (std::size_t i = 0; i < a.params().items().size(); ++i) {
            const auto va = a.params().items()[i].second.values(), vb = b.params().items()[i].second.values(),
                       vc = c.params().items()[i].second.values();
            CHECK(std::equal(va.begin(), va.end(), vb.begin()));
            differs = differs || !std::equal(va.begin(), va.end(), vc.begin());
        }
        CHECK(differs);
        const auto vis = partial(a.layout(), true);
        const auto da = a.decode(a.encode(f.tb, vis), vis), db = b.decode(b.encode(f.tb, vis), vis);
        const auto x = da.csi.values(), y = db.csi.values();
        CHECK(std::equal(x.begin(), x.end(), y.begin()));
    }

    TEST_CASE("attention rows are distributions and the untrained map is nearly flat")
    {
        Fixture f;
        const WfmModel<double> m(f.p, 2);
        std::vector<AttentionRecord> rec;
        m.encode(f.tb, Visibility::all_visible(m.layout()), &rec);
        REQUIRE(rec.size() == f.p.enc_layers);
        for (const auto& r : rec)
            for (std::size_t i = 0; i < r.seq; ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < r.seq; ++j)
                    s += r.probs[i * r.seq + j];
                CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
            }
        const auto map = m.attention_map(f.tb, Visibility::all_visible(m.layout()), 0);
        const auto [mn, mx] = std::minmax_element(map.begin(), map.end());
        CHECK(*mx == doctest::Approx(1.0));
        CHECK(*mx / *mn < 10.0);
        CHECK_THROWS_AS(m.attention_map(f.tb, Visibility::all_visible(m.layout()), f.p.enc_layers), std::out_of_range);
    }

    TEST_CASE("encoder stack is permutation equivariant")
    {
        Fixture f;
        const WfmModel<double> m(f.p, 3);
        const auto x = m.embed(f.tb);
        const std::size_t L = x.dim(0);
        std::vector<std::size_t> perm(L);
        for (std::size_t i = 0; i < L; ++i)
            perm[i] = (7 * i + 3) % L;
        const auto y = m.encoder_stack(x);
        const auto yp = m.encoder_stack(gather_rows(x, perm));
        const std::size_t D = x.dim(1);
        double err = 0.0;
        for (std::size_t i = 0; i < L; ++i)
            for (std::size_t d = 0; d < D; ++d)
                err = std::max(err, std::abs(yp.at(i * D + d) - y.at(perm[i] * D + d)));
        CHECK(err < 1e-12);
    }

    TEST_CASE("every parameter receives gradient except the attention key bias")
    {
        Fixture f;
        WfmModel<double> m(f.p, 4);
        Rng rng(9);
        for (bool loc_masked : {true, false}) {
            const auto vis = partial(m.layout(), loc_masked);
            const auto d = m.decode(m.encode(f.tb, vis), vis);
            total_loss(all_losses(d, rng), LossWeights{}).backward();
        }
        for (const auto& [name, t] : m.params().items()) {
            const auto g = t.grad();
            const double mx = std::accumulate(g.begin(), g.end(), 0.0,
                                              [](double a, double b) { return std::max(a, std::abs(b)); });
            if (name.ends_with("attn.k.b")) {
                INFO(name);
                CHECK(mx < 1e-12);
            } else {
                INFO(name);
                CHECK(mx > 0.0);
            }
        }
    }

    TEST_CASE("spectrum-only loss leaves the other heads untouched")
    {
        Fixture f;
        WfmModel<double> m(f.p, 4);
        Rng rng(10);
        const auto vis = partial(m.layout(), true);
        const auto d = m.decode(m.encode(f.tb, vis), vis);
        LossComponents<double> c;
        c.spec = loss_spectrum(d.physc_map, random_like<double>(rng, d.physc_map.shape(), 0.1, 2.0), 0.5, 1e-6);
        total_loss(c, LossWeights{}).backward();
        for (const auto& [name, t] : m.params().items())
            if (name.starts_with("head.csi") || name.starts_with("head.occ") || name.starts_with("head.loc")) {
                INFO(name);
                for (double v : t.grad())
                    CHECK(v == 0.0);
            }
    }

    TEST_CASE("decoder output shapes")
    {
        Fixture f;
        const WfmModel<float> m(f.p, 1);
        const auto vis = partial(m.layout(), true);
        const auto d = m.decode(m.encode(f.tb, vis), vis);
        CHECK(d.csi.dim(0) == vis.masked_csi().size());
        CHECK(d.csi.dim(1) == 8);
        CHECK(d.occ.dim(0) == vis.masked_scene().size());
        CHECK(d.loc.numel() == 2);
        CHECK(d.physc_map.numel() == f.p.coarse_x * f.p.coarse_y);
        for (float v : d.physc_map.values())
            CHECK(v >= 0.0f);

        const auto pp = paper_profile();
        const WfmModel<float> big(pp, 1);
        Rng rng(1);
        const auto ps = empty_scene(pp);
        const auto tb = tokenize(random_row(rng, pp.n_t()), ps, 10.0, 50.0, pp, make_normalization(pp, 1.0));
        const auto pv = partial(big.layout(), true);
        const auto pd = big.decode(big.encode(tb, pv), pv);
        CHECK(pd.csi.dim(1) == 32);
        CHECK(pd.loc.numel() == 2);
        CHECK(pd.physc_map.numel() == 64);
    }
}
