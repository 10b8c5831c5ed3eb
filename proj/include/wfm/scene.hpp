// SPDX-License-Identifier: Apache-2.0
//
// Procedural urban scenes on a square height grid.
//
// World frame: x runs along grid columns, y along grid rows, z up. Cell
// (ix, iy) covers [ix*res, (ix+1)*res) x [iy*res, (iy+1)*res) and its height is
// stored at heights[iy*n + ix]. The base station sits above the center of
// row 0 (the "top" edge) and its array faces +y into the scene.
#pragma once

#include "wfm/profile.hpp"
#include "wfm/rng.hpp"

#include <cstdint>
#include <vector>

namespace wfm {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;
};

inline Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
double norm(Vec3 a);

struct SceneMap {
    std::uint32_t scene_id = 0;
    std::size_t n = 0;
    double cell_m = 1.0;
    std::vector<float> heights; // n*n, meters
    Vec3 bs;

    double extent() const { return static_cast<double>(n) * cell_m; }
    float height(std::size_t ix, std::size_t iy) const { return heights[iy * n + ix]; }
    /// Height at a world point; zero outside the grid.
    double height_at(double x, double y) const;
    bool built(std::size_t ix, std::size_t iy) const { return height(ix, iy) > 0.0f; }
    double built_fraction() const;
};

/// Base-station position for a grid: top-center cell column, given height.
Vec3 bs_position(std::size_t n, double cell_m, double height_m);

SceneMap empty_scene(const Profile& profile, std::uint32_t scene_id = 0);

/// Axis-aligned rectangular buildings with heights U[5, 60] m, overlaps taking
/// the maximum, added until the built fraction reaches `density`. A disc
/// around the base station is kept clear.
SceneMap generate_scene(std::uint64_t seed, const Profile& profile, double density, std::uint32_t scene_id = 0);

struct OccupancyGrid {
    std::size_t p = 0;          // patches per side
    std::size_t patch_side = 0; // cells per patch side
    std::vector<std::uint8_t> bits; // p*p, index py*p + px

    bool at(std::size_t px, std::size_t py) const { return bits[py * p + px] != 0; }
};

/// A patch is occupied iff strictly more than 60% of its cells are built.
OccupancyGrid build_occupancy(const SceneMap& scene, std::size_t patch_side);

/// 2.5D blockage: true iff some cell along the 3D segment is taller than the
/// segment at that point. Samples segment midpoints at most half a cell apart.
bool los_blocked(const SceneMap& scene, Vec3 tx, Vec3 rx);

/// Vertical reflecting face: the plane `axis` = coord (0 for x, 1 for y) over
/// [span_lo, span_hi] along the other horizontal axis and [z_lo, z_hi] in height.
/// `outward` is +1 or -1: the side of the plane facing away from the building.
struct Face {
    int axis = 0;
    double coord = 0.0;
    double span_lo = 0.0, span_hi = 0.0;
    double z_lo = 0.0, z_hi = 0.0;
    int outward = 1;
};

/// Faces between a cell and a lower neighbor, merged along collinear runs.
std::vector<Face> extract_faces(const SceneMap& scene);

struct CorridorMask {
    std::vector<std::size_t> order;      // all patches by distance to the segment
    std::vector<double> distance;        // per patch index
    std::vector<std::size_t> candidates; // patches within the final radius
    std::vector<std::size_t> masked;     // sorted ascending
    double radius = 0.0;
    double target_ratio = 0.0;
};

std::size_t mask_count(double ratio, std::size_t total);

/// Geometry-aware scene masking. The radius starts at the nearest patch
/// distance and grows by one patch diagonal until enough candidates exist;
/// the masked subset is drawn uniformly from the candidates.
/// Coordinates are world meters; `p` patches per side of `patch_m` meters.
CorridorMask corridor_mask(std::size_t p, double patch_m, double tx_x, double tx_y, double rx_x, double rx_y,
                           double ratio, Rng& rng);

/// Distance from (px, py) to the segment a-b in the plane.
double point_segment_distance(double px, double py, double ax, double ay, double bx, double by);

} // namespace wfm
