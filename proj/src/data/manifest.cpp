// SPDX-License-Identifier: Apache-2.0
#include "wfm/data.hpp"

#include "wfm/binio.hpp"

#include <fstream>
#include <sstream>

namespace wfm {

std::uint64_t fnv1a(const std::string& s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string fmt_double(double v)
{
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::uint64_t DatasetManifest::config_hash() const
{
    const auto f = profile_fields(profile);
    std::ostringstream os;
    for (const char* key : {"grid_n", "cell_m", "bs_height_m", "user_height_m", "building_density", "n_x", "n_y",
                            "spacing", "carrier_hz"})
        os << key << '=' << f.at(key) << ';';
    os << "n_scenes=" << n_scenes << ";users_per_scene=" << users_per_scene << ";n_r=" << n_r << ";seed=" << seed
       << ";version=" << version;
    return fnv1a(os.str());
}

DatasetManifest make_manifest(const Profile& p, std::size_t n_scenes, std::size_t users_per_scene, std::size_t n_r,
                              std::uint64_t seed)
{
    p.validate();
    if (n_scenes == 0 || users_per_scene == 0 || n_r == 0 || n_r > 255)
        throw std::invalid_argument("manifest: scene count, users per scene and N_r must be positive (N_r <= 255)");
    DatasetManifest m;
    m.profile = p;
    m.n_scenes = n_scenes;
    m.users_per_scene = users_per_scene;
    m.n_r = n_r;
    m.seed = seed;
    m.half_extent = 0.5 * p.extent_m();
    return m;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m)
{
    std::ostringstream os;
    os << "# wfm dataset manifest\n";
    os << "format_version=" << m.version << '\n';
    os << "n_scenes=" << m.n_scenes << '\n';
    os << "users_per_scene=" << m.users_per_scene << '\n';
    os << "n_r=" << m.n_r << '\n';
    os << "seed=" << m.seed << '\n';
    os << "csi_rms=" << fmt_double(m.csi_rms) << '\n';
    os << "height_scale=" << fmt_double(m.height_scale) << '\n';
    os << "half_extent=" << fmt_double(m.half_extent) << '\n';
    os << "config_hash=" << m.config_hash() << '\n';
    for (const auto& [k, v] : profile_fields(m.profile))
        os << "profile." << k << '=' << v << '\n';
    const auto s = os.str();
    binio::write_file_atomic(path.string(), std::vector<std::uint8_t>(s.begin(), s.end()));
}

DatasetManifest read_manifest(const std::filesystem::path& path)
{
    const auto kv = read_kv_file(path.string());
    auto get = [&](const std::string& k) -> const std::string& {
        const auto it = kv.find(k);
        if (it == kv.end())
            throw DataError("manifest " + path.string() + ": missing key '" + k + "'");
        return it->second;
    };
    DatasetManifest m;
    std::map<std::string, std::string> prof;
    for (const auto& [k, v] : kv)
        if (k.rfind("profile.", 0) == 0)
            prof[k.substr(8)] = v;
    m.profile = profile_by_name(prof.count("name") ? prof.at("name") : "desk");
    apply_overrides(m.profile, prof);
    m.version = static_cast<std::uint16_t>(std::stoul(get("format_version")));
    if (m.version != kManifestVersion)
        throw DataError("manifest " + path.string() + ": unsupported version " + std::to_string(m.version));
    m.n_scenes = std::stoull(get("n_scenes"));
    m.users_per_scene = std::stoull(get("users_per_scene"));
    m.n_r = std::stoull(get("n_r"));
    m.seed = std::stoull(get("seed"));
    m.csi_rms = std::stod(get("csi_rms"));
    m.height_scale = std::stod(get("height_scale"));
    m.half_extent = std::stod(get("half_extent"));
    if (!(m.csi_rms > 0.0 && m.height_scale > 0.0 && m.half_extent > 0.0))
        throw DataError("manifest " + path.string() + ": normalization constants must be positive");
    if (std::stoull(get("config_hash")) != m.config_hash())
        throw DataError("manifest " + path.string() + ": config hash does not match its fields");
    return m;
}

} // namespace wfm
