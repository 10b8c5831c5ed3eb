// SPDX-License-Identifier: Apache-2.0
//
// Narrowband multipath channels: line of sight plus first-order specular
// reflections off building faces, summed per the standard ray model
//   H = sum_l alpha_l a_r(aoa_l) a_t(aod_l)^H exp(-j 2 pi f tau_l).
//
// Array frame: the planar transmit array lies in the world x-z plane facing +y.
// Element (n, m) sits at n along world x and m along world z. For a unit
// direction u, theta = acos(u_y) and phi = atan2(u_z, u_x), so that
// sin(theta)cos(phi) = u_x and sin(theta)sin(phi) = u_z. Antenna vectors are
// flattened column-wise: index n + m*n_x.
#pragma once

#include "wfm/cmatrix.hpp"
#include "wfm/rng.hpp"
#include "wfm/scene.hpp"

#include <limits>
#include <vector>

namespace wfm {

constexpr double kSpeedOfLight = 299792458.0;

struct ArrayGeometry {
    std::size_t n_x = 1, n_y = 1;
    double spacing = 0.5; // wavelengths
    double carrier_hz = 28.5e9;

    std::size_t size() const { return n_x * n_y; }
    double wavelength() const { return kSpeedOfLight / carrier_hz; }
};

ArrayGeometry tx_array(const Profile& p);
/// Receive line array of `n` elements along world x.
ArrayGeometry rx_array(const Profile& p, std::size_t n);

struct Angles {
    double theta = 0.0, phi = 0.0;
};

/// Angles of a (not necessarily unit) direction vector in the array frame.
Angles direction_angles(Vec3 d);

enum class PathKind { Los, Reflection };

struct PathComponent {
    cd gain;
    double delay_s = 0.0;
    double length_m = 0.0;
    Angles aod, aoa;
    PathKind kind = PathKind::Los;
};

/// exp(-j 2 pi spacing (n sin(theta)cos(phi) + m sin(theta)sin(phi))), flattened n + m*n_x.
std::vector<cd> steering_vector(const ArrayGeometry& array, double theta, double phi);

constexpr cd kReflectionCoefficient{-0.7, 0.0}; // 0.7 at 180 degrees

/// LOS when unblocked, plus one image-method candidate per face kept when the
/// bounce point lies on the face and both legs are unblocked.
std::vector<PathComponent> trace_paths(const SceneMap& scene, const std::vector<Face>& faces, Vec3 tx, Vec3 rx,
                                       double carrier_hz);
std::vector<PathComponent> trace_paths(const SceneMap& scene, Vec3 tx, Vec3 rx, double carrier_hz);

/// Channel as N_r x N_t with y = H x. Row r equals h_r^H, where h_r is the
/// CSI vector of receive antenna r in the convention of the precoders.
ComplexMatrix synthesize_channel(const std::vector<PathComponent>& paths, const ArrayGeometry& tx,
                                 const ArrayGeometry& rx, double carrier_hz);

struct ChannelSample {
    std::uint32_t scene_id = 0;
    double rx_x = 0.0, rx_y = 0.0; // meters relative to the base station
    ComplexMatrix H;               // N_r x N_t
    /// h_r = conj(row r), the vector whose spectrum aligns with beam gains.
    std::vector<cd> csi_vector(std::size_t r = 0) const;
    std::vector<PathComponent> paths;
    bool deep_nlos() const { return paths.empty(); }
};

constexpr double kNoNoise = std::numeric_limits<double>::infinity();

/// Adds CN(0, s^2) noise with s^2 = ||H||_F^2 / (N_elems 10^(snr/10)).
/// snr_db = +inf leaves H unchanged.
ComplexMatrix add_noise(const ComplexMatrix& H, double snr_db, Rng& rng);

} // namespace wfm
