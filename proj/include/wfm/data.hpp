// SPDX-License-Identifier: Apache-2.0
//
// Dataset generation, binary shards, manifests, splits, oracle labels and
// reproducible CSV output.
//
// Shard layout (little-endian):
//   "WFMD" u16 version u16 n_x u16 n_y u32 scene_count u32 sample_count
//   scene_count x {u32 scene_id, u16 N, f32 heights[N*N]}
//   sample_count x {u32 scene_id, f32 rx_x, f32 rx_y, u8 N_r, f32 re/im[N_r*N_t]}
//   u32 crc32 of everything before it
#pragma once

#include "wfm/channel.hpp"
#include "wfm/profile.hpp"
#include "wfm/scene.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace wfm {

constexpr std::uint16_t kShardVersion = 1;
constexpr std::uint16_t kManifestVersion = 1;
constexpr const char* kToolVersion = "0.1.0";
constexpr std::size_t kMaxSceneRedraws = 50;

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DatasetManifest {
    Profile profile;
    std::size_t n_scenes = 20;
    std::size_t users_per_scene = 32;
    std::size_t n_r = 1;
    std::uint64_t seed = 1;
    std::uint16_t version = kManifestVersion;
    // Normalization constants; filled in by generation.
    double csi_rms = 0.0;
    double height_scale = 60.0;
    double half_extent = 0.0;

    /// FNV-1a over the generation-relevant fields.
    std::uint64_t config_hash() const;
    std::size_t sample_count() const { return n_scenes * users_per_scene; }
};

DatasetManifest make_manifest(const Profile& p, std::size_t n_scenes, std::size_t users_per_scene, std::size_t n_r,
                              std::uint64_t seed);

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m);
DatasetManifest read_manifest(const std::filesystem::path& path);

struct Dataset {
    DatasetManifest manifest;
    std::vector<SceneMap> scenes; // index == scene_id
    std::vector<ChannelSample> samples;

    const SceneMap& scene_of(const ChannelSample& s) const { return scenes.at(s.scene_id); }
};

/// Users are drawn uniformly over open cells at user height; positions whose
/// channel has no propagation path are redrawn.
std::vector<ChannelSample> sample_users(const SceneMap& scene, const std::vector<Face>& faces, const Profile& p,
                                        std::size_t count, std::size_t n_r, Rng& rng);

/// Scenes and channels from the manifest; csi_rms and half_extent are filled
/// in. A scene whose layout leaves too few reachable user positions is redrawn
/// from a derived seed, keeping its id.
Dataset generate_dataset(const DatasetManifest& m);

/// RMS magnitude of all channel entries.
double csi_rms(const std::vector<ChannelSample>& samples);

std::vector<std::uint8_t> encode_shard(const Profile& p, const std::vector<SceneMap>& scenes,
                                       const std::vector<ChannelSample>& samples);
/// Validates magic, version, array dims and CRC.
void decode_shard(const std::vector<std::uint8_t>& bytes, const Profile& p, std::vector<SceneMap>& scenes,
                  std::vector<ChannelSample>& samples);

/// Writes manifest.txt plus one shard per scene; on failure, files already
/// written are removed.
void write_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset read_dataset(const std::filesystem::path& dir);

std::uint32_t crc32(const std::uint8_t* data, std::size_t n);

// -------------------------------------------------------------------- splits

enum class SplitScheme { WithinScene, CrossScene };

struct Split {
    std::vector<std::size_t> train, val, test; // sample indices
};

/// Cross-scene splits whole scenes (train fraction of scenes, at least one
/// scene on each side). Within-scene splits the samples of `scene_id` only.
Split split_dataset(const Dataset& ds, SplitScheme scheme, double train_fraction, std::uint64_t seed,
                    std::uint32_t scene_id = 0, double val_fraction = 0.0);

// -------------------------------------------------------------------- labels

enum class LabelTask { MuBeam, SuPair, Location };
LabelTask label_task_from_name(const std::string& name);

struct LabelSet {
    LabelTask task = LabelTask::Location;
    std::vector<std::vector<std::size_t>> indices; // per sample; beams or tx pair followed by rx pair
    std::vector<double> rates;                     // per group (mu) or per sample (su)
    std::vector<std::array<double, 2>> locations;  // per sample
    std::size_t group_size = 1;
};

/// Multi-user groups are consecutive runs of `profile.mu_users` samples within
/// a scene; trailing users that do not fill a group get beam labels only.
/// `su_budget` caps the single-user candidate count per sample.
LabelSet oracle_labels(const Dataset& ds, LabelTask task, std::uint64_t su_budget = 1'000'000);

/// Index groups of K users, consecutive within each scene.
std::vector<std::vector<std::size_t>> mu_groups(const Dataset& ds, const std::vector<std::size_t>& samples, std::size_t K);

// ----------------------------------------------------------------------- CSV

/// "# version=..., config_hash=..., seed=..." line written at the top of every output.
void write_repro_header(std::ostream& os, std::uint64_t config_hash, std::uint64_t seed);

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, std::uint64_t config_hash, std::uint64_t seed,
              const std::vector<std::string>& columns);
    void row(const std::vector<std::string>& cells);
    void close();

private:
    std::filesystem::path path_;
    std::string buf_;
    std::size_t ncols_;
};

std::string fmt_double(double v);

void write_labels_csv(const std::filesystem::path& path, const LabelSet& labels, std::uint64_t config_hash,
                      std::uint64_t seed);

/// FNV-1a 64 of a byte string.
std::uint64_t fnv1a(const std::string& s);

} // namespace wfm
