// SPDX-License-Identifier: Apache-2.0
#include "wfm/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace wfm {

double norm(Vec3 a)
{
    return std::sqrt(a.x * a.x + a.y * a.y + a.z * a.z);
}

double SceneMap::height_at(double x, double y) const
{
    if (x < 0.0 || y < 0.0)
        return 0.0;
    const auto ix = static_cast<std::size_t>(x / cell_m);
    const auto iy = static_cast<std::size_t>(y / cell_m);
    if (ix >= n || iy >= n)
        return 0.0;
    return height(ix, iy);
}

double SceneMap::built_fraction() const
{
    if (heights.empty())
        return 0.0;
    const auto built = std::count_if(heights.begin(), heights.end(), [](float h) { return h > 0.0f; });
    return static_cast<double>(built) / static_cast<double>(heights.size());
}

Vec3 bs_position(std::size_t n, double cell_m, double height_m)
{
    return {0.5 * static_cast<double>(n) * cell_m, 0.5 * cell_m, height_m};
}

SceneMap empty_scene(const Profile& profile, std::uint32_t scene_id)
{
    SceneMap s;
    s.scene_id = scene_id;
    s.n = profile.grid_n;
    s.cell_m = profile.cell_m;
    s.heights.assign(s.n * s.n, 0.0f);
    s.bs = bs_position(s.n, s.cell_m, profile.bs_height_m);
    return s;
}

SceneMap generate_scene(std::uint64_t seed, const Profile& profile, double density, std::uint32_t scene_id)
{
    if (!(density >= 0.0 && density <= 1.0))
        throw std::invalid_argument("generate_scene: density must lie in [0,1]");
    SceneMap s = empty_scene(profile, scene_id);
    if (density == 0.0)
        return s;

    Rng rng(stream_seed(seed, 0x7363656e65ULL, scene_id));
    const std::size_t n = s.n;
    const double res = s.cell_m;
    const double clear_r = std::max(res, 5.0);
    std::vector<bool> clear(n * n, false);
    for (std::size_t iy = 0; iy < n; ++iy)
        for (std::size_t ix = 0; ix < n; ++ix) {
            const double cx = (ix + 0.5) * res - s.bs.x;
            const double cy = (iy + 0.5) * res - s.bs.y;
            clear[iy * n + ix] = std::hypot(cx, cy) <= clear_r + 1e-9;
        }

    std::size_t built = 0;
    const std::size_t target = static_cast<std::size_t>(std::llround(density * static_cast<double>(n * n)));
    const auto side_cells = [&](double meters) {
        return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(meters / res)));
    };
    for (int attempt = 0; attempt < 100000 && built < target; ++attempt) {
        const std::size_t w = std::min(n, side_cells(rng.uniform(10.0, 40.0)));
        const std::size_t d = std::min(n, side_cells(rng.uniform(10.0, 40.0)));
        const std::size_t x0 = rng.uniform_index(n - w + 1);
        const std::size_t y0 = rng.uniform_index(n - d + 1);
        const auto h = static_cast<float>(rng.uniform(5.0, 60.0));
        for (std::size_t iy = y0; iy < y0 + d; ++iy)
            for (std::size_t ix = x0; ix < x0 + w; ++ix) {
                const std::size_t k = iy * n + ix;
                if (clear[k])
                    continue;
                if (s.heights[k] == 0.0f)
                    ++built;
                s.heights[k] = std::max(s.heights[k], h);
            }
    }
    return s;
}

OccupancyGrid build_occupancy(const SceneMap& scene, std::size_t patch_side)
{
    if (patch_side == 0 || scene.n % patch_side != 0)
        throw std::invalid_argument("build_occupancy: patch side " + std::to_string(patch_side) +
                                    " does not divide grid size " + std::to_string(scene.n));
    OccupancyGrid g;
    g.patch_side = patch_side;
    g.p = scene.n / patch_side;
    g.bits.assign(g.p * g.p, 0);
    const std::size_t cells = patch_side * patch_side;
    for (std::size_t py = 0; py < g.p; ++py)
        for (std::size_t px = 0; px < g.p; ++px) {
            std::size_t count = 0;
            for (std::size_t dy = 0; dy < patch_side; ++dy)
                for (std::size_t dx = 0; dx < patch_side; ++dx)
                    count += scene.built(px * patch_side + dx, py * patch_side + dy) ? 1 : 0;
            // count / cells > 0.6, in integers
            g.bits[py * g.p + px] = (10 * count > 6 * cells) ? 1 : 0;
        }
    return g;
}

bool los_blocked(const SceneMap& scene, Vec3 tx, Vec3 rx)
{
    if (std::tie(rx.x, rx.y, rx.z) < std::tie(tx.x, tx.y, tx.z))
        std::swap(tx, rx);
    const double horiz = std::hypot(rx.x - tx.x, rx.y - tx.y);
    const auto steps = static_cast<std::size_t>(std::ceil(2.0 * horiz / scene.cell_m)) + 1;
    for (std::size_t k = 0; k < steps; ++k) {
        const double t = (static_cast<double>(k) + 0.5) / static_cast<double>(steps);
        const double x = tx.x + t * (rx.x - tx.x);
        const double y = tx.y + t * (rx.y - tx.y);
        const double z = tx.z + t * (rx.z - tx.z);
        if (scene.height_at(x, y) > z)
            return true;
    }
    return false;
}

std::vector<Face> extract_faces(const SceneMap& scene)
{
    const std::size_t n = scene.n;
    const double res = scene.cell_m;
    std::vector<Face> faces;

    // Unit edges keyed by (line index, position along the line); merged on the fly.
    auto emit_runs = [&](int axis, int outward, auto&& edge_at) {
        // Planes at coordinate index c in [0, n]; runs along index s in [0, n).
        for (std::size_t c = 0; c <= n; ++c) {
            bool open = false;
            Face cur;
            for (std::size_t s = 0; s <= n; ++s) {
                double lo = 0.0, hi = 0.0;
                const bool has = s < n && edge_at(c, s, lo, hi);
                if (open && (!has || lo != cur.z_lo || hi != cur.z_hi)) {
                    faces.push_back(cur);
                    open = false;
                }
                if (has && !open) {
                    cur = Face{axis, static_cast<double>(c) * res, static_cast<double>(s) * res, 0.0, lo, hi, outward};
                    open = true;
                }
                if (open)
                    cur.span_hi = static_cast<double>(s + 1) * res;
            }
        }
    };

    auto h = [&](std::size_t ix, std::size_t iy) { return static_cast<double>(scene.height(ix, iy)); };

    // Planes x = c*res. Building at ix = c-1 facing +x toward ix = c.
    emit_runs(0, +1, [&](std::size_t c, std::size_t iy, double& lo, double& hi) {
        if (c == 0 || c >= n)
            return false;
        hi = h(c - 1, iy);
        lo = h(c, iy);
        return hi > lo;
    });
    // Building at ix = c facing -x toward ix = c-1.
    emit_runs(0, -1, [&](std::size_t c, std::size_t iy, double& lo, double& hi) {
        if (c == 0 || c >= n)
            return false;
        hi = h(c, iy);
        lo = h(c - 1, iy);
        return hi > lo;
    });
    emit_runs(1, +1, [&](std::size_t c, std::size_t ix, double& lo, double& hi) {
        if (c == 0 || c >= n)
            return false;
        hi = h(ix, c - 1);
        lo = h(ix, c);
        return hi > lo;
    });
    emit_runs(1, -1, [&](std::size_t c, std::size_t ix, double& lo, double& hi) {
        if (c == 0 || c >= n)
            return false;
        hi = h(ix, c);
        lo = h(ix, c - 1);
        return hi > lo;
    });
    return faces;
}

std::size_t mask_count(double ratio, std::size_t total)
{
    const auto c = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(total)));
    return std::clamp<std::size_t>(c, total ? 1 : 0, total);
}

double point_segment_distance(double px, double py, double ax, double ay, double bx, double by)
{
    const double dx = bx - ax, dy = by - ay;
    const double len2 = dx * dx + dy * dy;
    double t = 0.0;
    if (len2 > 0.0)
        t = std::clamp(((px - ax) * dx + (py - ay) * dy) / len2, 0.0, 1.0);
    return std::hypot(px - (ax + t * dx), py - (ay + t * dy));
}

CorridorMask corridor_mask(std::size_t p, double patch_m, double tx_x, double tx_y, double rx_x, double rx_y,
                           double ratio, Rng& rng)
{
    if (!(ratio > 0.0 && ratio < 1.0))
        throw std::invalid_argument("corridor_mask: ratio must lie in (0,1)");
    CorridorMask m;
    m.target_ratio = ratio;
    const std::size_t total = p * p;
    m.distance.resize(total);
    for (std::size_t py = 0; py < p; ++py)
        for (std::size_t px = 0; px < p; ++px)
            m.distance[py * p + px] =
                point_segment_distance((px + 0.5) * patch_m, (py + 0.5) * patch_m, tx_x, tx_y, rx_x, rx_y);
    m.order.resize(total);
    std::iota(m.order.begin(), m.order.end(), 0);
    std::stable_sort(m.order.begin(), m.order.end(),
                     [&](std::size_t a, std::size_t b) { return m.distance[a] < m.distance[b]; });

    const std::size_t count = mask_count(ratio, total);
    const double step = std::sqrt(2.0) * patch_m;
    const double tol = 1e-9 * patch_m;
    m.radius = m.distance[m.order[0]];
    auto within = [&] {
        return static_cast<std::size_t>(std::count_if(m.distance.begin(), m.distance.end(),
                                                       [&](double d) { return d <= m.radius + tol; }));
    };
    while (within() < count)
        m.radius += step;
    for (std::size_t idx : m.order)
        if (m.distance[idx] <= m.radius + tol)
            m.candidates.push_back(idx);

    for (std::size_t pick : rng.sample_without_replacement(m.candidates.size(), count))
        m.masked.push_back(m.candidates[pick]);
    std::sort(m.masked.begin(), m.masked.end());
    return m;
}

} // namespace wfm
