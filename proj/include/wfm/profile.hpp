// SPDX-License-Identifier: Apache-2.0
//
// Scale profiles. "desk" is the default laptop-scale configuration; "paper"
// mirrors the full-size architecture and scene dimensions.
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>

namespace wfm {

struct Profile {
    std::string name = "desk";

    // Scene
    std::size_t grid_n = 40;
    double cell_m = 5.0;
    std::size_t scene_patch = 10;
    double bs_height_m = 15.0;
    double user_height_m = 1.5;
    double building_density = 0.3;

    // Transmit array and carrier
    std::size_t n_x = 8;
    std::size_t n_y = 8;
    double spacing = 0.5;
    double carrier_hz = 28.5e9;

    // Model
    std::size_t csi_patch = 2;
    std::size_t embed_dim = 32;
    std::size_t enc_layers = 2;
    std::size_t dec_layers = 1;
    std::size_t heads = 2;
    std::size_t mlp_ratio = 4;
    std::size_t coarse_x = 4;
    std::size_t coarse_y = 4;
    std::size_t physc_channels = 32;
    bool physc_conv = true;

    // Tasks
    std::size_t users_per_scene = 32;
    std::size_t mu_users = 4;
    std::size_t su_rx = 4;
    std::size_t su_streams = 2;
    std::size_t su_rf = 2;
    double snr_db = 10.0;

    std::size_t n_t() const { return n_x * n_y; }
    std::size_t scene_grid_patches() const { return grid_n / scene_patch; }
    std::size_t scene_tokens() const { return scene_grid_patches() * scene_grid_patches(); }
    std::size_t csi_tokens() const { return (n_x / csi_patch) * (n_y / csi_patch); }
    double extent_m() const { return static_cast<double>(grid_n) * cell_m; }

    /// Throws std::invalid_argument naming the first violated constraint.
    void validate() const;
};

Profile desk_profile();
Profile paper_profile();
/// "desk" or "paper".
Profile profile_by_name(const std::string& name);

/// Applies key=value overrides (keys are the field names above).
void apply_overrides(Profile& p, const std::map<std::string, std::string>& kv);

/// Parses a key=value text file; '#' starts a comment.
std::map<std::string, std::string> read_kv_file(const std::string& path);

/// All fields as ordered key=value pairs.
std::map<std::string, std::string> profile_fields(const Profile& p);

} // namespace wfm
