// SPDX-License-Identifier: Apache-2.0
#include "wfm/scene.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

using namespace wfm;

namespace {

void fill_cells(SceneMap& s, std::size_t x0, std::size_t y0, std::size_t w, std::size_t h, float height)
{
    for (std::size_t y = y0; y < y0 + h; ++y)
        for (std::size_t x = x0; x < x0 + w; ++x)
            s.heights[y * s.n + x] = height;
}

} // namespace

TEST_SUITE("scene")
{
    TEST_CASE("density 0 gives an empty height map")
    {
        const auto s = generate_scene(1, desk_profile(), 0.0);
        CHECK(std::all_of(s.heights.begin(), s.heights.end(), [](float h) { return h == 0.0f; }));
    }

    TEST_CASE("generation is deterministic in the seed")
    {
        const auto a = generate_scene(1, desk_profile(), 0.3);
        const auto b = generate_scene(1, desk_profile(), 0.3);
        CHECK(a.heights == b.heights);
        const auto c = generate_scene(2, desk_profile(), 0.3);
        CHECK(a.heights != c.heights);
    }

    TEST_CASE("built fraction tracks the density")
    {
        for (const auto& p : {desk_profile(), paper_profile()}) {
            const auto s = generate_scene(1, p, 0.3);
            std::size_t built = 0;
            for (float h : s.heights)
                built += h > 0.0f;
            const double frac = double(built) / double(s.heights.size());
            CHECK(frac == doctest::Approx(0.3).epsilon(0.05 / 0.3));
            CHECK(s.built_fraction() == doctest::Approx(frac));
        }
    }

    TEST_CASE("heights lie in [5, 60] m and the base station sits at the top center")
    {
        const auto p = desk_profile();
        const auto s = generate_scene(9, p, 0.4);
        for (float h : s.heights)
            CHECK((h == 0.0f || (h >= 5.0f && h <= 60.0f)));
        CHECK(s.bs.x == doctest::Approx(0.5 * s.extent()));
        CHECK(s.bs.y < p.cell_m);
        CHECK(s.bs.z == p.bs_height_m);
    }

    TEST_CASE("occupancy threshold is strictly above 60 percent")
    {
        auto s = empty_scene(paper_profile());
        const std::size_t side = 10;
        // Patch (0,0) gets 61 built cells, patch (1,0) exactly 60.
        std::size_t k = 0;
        for (std::size_t y = 0; y < side; ++y)
            for (std::size_t x = 0; x < side; ++x, ++k) {
                if (k < 61)
                    s.heights[y * s.n + x] = 10.0f;
                if (k < 60)
                    s.heights[y * s.n + side + x] = 10.0f;
            }
        const auto occ = build_occupancy(s, side);
        CHECK(occ.p == 20);
        CHECK(occ.at(0, 0));
        CHECK_FALSE(occ.at(1, 0));
    }

    TEST_CASE("occupancy of empty and fully built scenes")
    {
        auto s = empty_scene(desk_profile());
        auto occ = build_occupancy(s, 10);
        CHECK(std::all_of(occ.bits.begin(), occ.bits.end(), [](auto b) { return b == 0; }));
        std::fill(s.heights.begin(), s.heights.end(), 20.0f);
        occ = build_occupancy(s, 10);
        CHECK(std::all_of(occ.bits.begin(), occ.bits.end(), [](auto b) { return b == 1; }));
        CHECK_THROWS(build_occupancy(s, 7));
    }

    TEST_CASE("occupancy is idempotent and monotone in heights")
    {
        Rng rng(12);
        for (int t = 0; t < 20; ++t) {
            auto s = generate_scene(100 + t, desk_profile(), rng.uniform(0.1, 0.7));
            const auto a = build_occupancy(s, 10);
            CHECK(build_occupancy(s, 10).bits == a.bits);
            for (int k = 0; k < 30; ++k)
                s.heights[rng.uniform_index(s.heights.size())] += 7.0f;
            const auto b = build_occupancy(s, 10);
            for (std::size_t i = 0; i < a.bits.size(); ++i)
                CHECK(b.bits[i] >= a.bits[i]);
        }
    }

    TEST_CASE("line of sight over a wall midway")
    {
        auto s = empty_scene(desk_profile());
        const Vec3 tx{100.0, 2.5, 15.0}, rx{100.0, 102.5, 1.5};
        CHECK_FALSE(los_blocked(s, tx, rx));
        // Segment height at the wall is about 8.25 m.
        fill_cells(s, 10, 10, 20, 1, 30.0f);
        CHECK(los_blocked(s, tx, rx));
        fill_cells(s, 10, 10, 20, 1, 2.0f);
        CHECK_FALSE(los_blocked(s, tx, rx));
    }

    TEST_CASE("line-of-sight test is symmetric")
    {
        Rng rng(21);
        const auto s = generate_scene(5, desk_profile(), 0.4);
        for (int t = 0; t < 300; ++t) {
            const Vec3 a{rng.uniform(0.0, 200.0), rng.uniform(0.0, 200.0), rng.uniform(0.0, 40.0)};
            const Vec3 b{rng.uniform(0.0, 200.0), rng.uniform(0.0, 200.0), rng.uniform(0.0, 40.0)};
            CHECK(los_blocked(s, a, b) == los_blocked(s, b, a));
        }
    }

    TEST_CASE("corridor with a single masked patch picks the nearest patch center")
    {
        Rng rng(31);
        const std::size_t P = 20;
        const double pm = 10.0;
        for (int t = 0; t < 200; ++t) {
            const double ax = rng.uniform(0, 200), ay = rng.uniform(0, 200);
            const double bx = rng.uniform(0, 200), by = rng.uniform(0, 200);
            std::size_t best = 0;
            double bd = INFINITY;
            for (std::size_t py = 0; py < P; ++py)
                for (std::size_t px = 0; px < P; ++px) {
                    const double cx = (px + 0.5) * pm, cy = (py + 0.5) * pm;
                    const double dx = bx - ax, dy = by - ay;
                    const double u = std::clamp(((cx - ax) * dx + (cy - ay) * dy) / (dx * dx + dy * dy), 0.0, 1.0);
                    const double d = std::hypot(cx - ax - u * dx, cy - ay - u * dy);
                    if (d < bd - 1e-9) {
                        bd = d;
                        best = py * P + px;
                    }
                }
            const auto m = corridor_mask(P, pm, ax, ay, bx, by, 1.0 / 400.0, rng);
            REQUIRE(m.masked.size() == 1);
            if (m.candidates.size() == 1)
                CHECK(m.masked[0] == best);
            else
                CHECK(m.distance[m.masked[0]] == doctest::Approx(bd).epsilon(1e-9));
        }
    }

    TEST_CASE("ratio 0.05 on a 20x20 grid masks exactly 20 patches")
    {
        Rng rng(4);
        const auto m = corridor_mask(20, 10.0, 100.0, 0.5, 60.0, 150.0, 0.05, rng);
        CHECK(m.masked.size() == 20);
        CHECK(mask_count(0.05, 400) == 20);
    }

    TEST_CASE("corridor invariants: masked within candidates within radius")
    {
        Rng rng(8);
        for (int t = 0; t < 300; ++t) {
            const std::size_t P = 4 + rng.uniform_index(17);
            const double pm = 10.0, ext = P * pm;
            const double ratio = rng.uniform(0.01, 0.95);
            const auto m = corridor_mask(P, pm, rng.uniform(0, ext), rng.uniform(0, ext), rng.uniform(0, ext),
                                         rng.uniform(0, ext), ratio, rng);
            CHECK(m.masked.size() == mask_count(ratio, P * P));
            const std::set<std::size_t> cand(m.candidates.begin(), m.candidates.end());
            double max_sel = 0.0;
            for (auto i : m.masked) {
                CHECK(cand.count(i) == 1);
                max_sel = std::max(max_sel, m.distance[i]);
            }
            for (auto i : m.candidates)
                CHECK(m.distance[i] <= m.radius + 1e-9 * pm);
            CHECK(std::is_sorted(m.masked.begin(), m.masked.end()));
        }
    }

    TEST_CASE("receiver straight below the transmitter masks symmetrically in distribution")
    {
        const std::size_t P = 20;
        std::vector<double> col(P, 0.0);
        for (std::uint64_t seed = 0; seed < 4000; ++seed) {
            Rng rng(seed);
            const auto m = corridor_mask(P, 10.0, 100.0, 0.5, 100.0, 120.0, 0.1, rng);
            for (auto i : m.masked)
                col[i % P] += 1.0;
        }
        for (std::size_t px = 0; px < P / 2; ++px) {
            const double a = col[px], b = col[P - 1 - px];
            // Binomial-scale tolerance around equal counts.
            CHECK(std::abs(a - b) <= 5.0 * std::sqrt(a + b + 1.0));
        }
    }

    TEST_CASE("mask_count rounds and clamps")
    {
        CHECK(mask_count(0.5, 64) == 32);
        CHECK(mask_count(0.05, 64) == 3);
        CHECK(mask_count(0.001, 16) == 1);
        CHECK(mask_count(1.0, 16) == 16);
    }
}
