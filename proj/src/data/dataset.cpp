// SPDX-License-Identifier: Apache-2.0
#include "wfm/binio.hpp"
#include "wfm/data.hpp"

#include <cmath>
#include <cstdio>

namespace wfm {

namespace {

// Shards store f32; quantizing at generation makes in-memory and reloaded
// datasets identical.
double q32(double v) { return static_cast<double>(static_cast<float>(v)); }

std::string shard_name(std::size_t scene)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "shard_%05zu.wfmd", scene);
    return buf;
}

} // namespace

std::vector<ChannelSample> sample_users(const SceneMap& scene, const std::vector<Face>& faces, const Profile& p,
                                        std::size_t count, std::size_t n_r, Rng& rng)
{
    const auto tx_arr = tx_array(p);
    const auto rx_arr = rx_array(p, n_r);
    const double extent = scene.extent();
    const double min_dist = 2.0 * scene.cell_m;
    std::vector<ChannelSample> out;
    out.reserve(count);
    std::size_t attempts = 0;
    const std::size_t max_attempts = 200 * count + 1000;
    while (out.size() < count) {
        if (++attempts > max_attempts)
            throw DataError("sample_users: scene " + std::to_string(scene.scene_id) +
                            " has too few reachable open positions");
        const double x = q32(rng.uniform(0.0, extent) - scene.bs.x) + scene.bs.x;
        const double y = q32(rng.uniform(0.0, extent) - scene.bs.y) + scene.bs.y;
        if (scene.height_at(x, y) > 0.0)
            continue;
        if (std::hypot(x - scene.bs.x, y - scene.bs.y) < min_dist)
            continue;
        const Vec3 rx{x, y, p.user_height_m};
        auto paths = trace_paths(scene, faces, scene.bs, rx, p.carrier_hz);
        if (paths.empty())
            continue;
        ChannelSample s;
        s.scene_id = scene.scene_id;
        s.rx_x = q32(x - scene.bs.x);
        s.rx_y = q32(y - scene.bs.y);
        s.H = synthesize_channel(paths, tx_arr, rx_arr, p.carrier_hz);
        for (auto& z : s.H.data())
            z = cd(q32(z.real()), q32(z.imag()));
        s.paths = std::move(paths);
        out.push_back(std::move(s));
    }
    return out;
}

double csi_rms(const std::vector<ChannelSample>& samples)
{
    double acc = 0.0;
    std::size_t n = 0;
    for (const auto& s : samples) {
        acc += frobenius_norm_sq(s.H);
        n += s.H.rows() * s.H.cols();
    }
    if (n == 0 || acc <= 0.0)
        throw DataError("csi_rms: dataset has no channel energy");
    return std::sqrt(acc / static_cast<double>(n));
}

Dataset generate_dataset(const DatasetManifest& m)
{
    Dataset ds;
    ds.manifest = m;
    const auto& p = m.profile;
    for (std::size_t s = 0; s < m.n_scenes; ++s) {
        const auto id = static_cast<std::uint32_t>(s);
        // Layouts that leave too few reachable positions are redrawn.
        for (std::size_t attempt = 0;; ++attempt) {
            if (attempt == kMaxSceneRedraws)
                throw DataError("generate_dataset: scene " + std::to_string(s) + " has no usable layout after " +
                                std::to_string(attempt) + " draws");
            const std::uint64_t sseed = attempt == 0 ? m.seed : stream_seed(m.seed, 0x726564726177ULL, attempt);
            auto scene = generate_scene(sseed, p, p.building_density, id);
            const auto faces = extract_faces(scene);
            Rng rng(stream_seed(m.seed, 0x7573657273ULL, s));
            std::vector<ChannelSample> users;
            try {
                users = sample_users(scene, faces, p, m.users_per_scene, m.n_r, rng);
            } catch (const DataError&) {
                continue;
            }
            for (auto& u : users)
                ds.samples.push_back(std::move(u));
            ds.scenes.push_back(std::move(scene));
            break;
        }
    }
    ds.manifest.csi_rms = csi_rms(ds.samples);
    ds.manifest.half_extent = 0.5 * p.extent_m();
    return ds;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& ds)
{
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    try {
        for (const auto& scene : ds.scenes) {
            std::vector<ChannelSample> mine;
            for (const auto& s : ds.samples)
                if (s.scene_id == scene.scene_id)
                    mine.push_back(s);
            const auto path = dir / shard_name(scene.scene_id);
            binio::write_file_atomic(path.string(), encode_shard(ds.manifest.profile, {scene}, mine));
            written.push_back(path);
        }
        const auto mpath = dir / "manifest.txt";
        write_manifest(mpath, ds.manifest);
        written.push_back(mpath);
    } catch (...) {
        std::error_code ec;
        for (const auto& f : written)
            std::filesystem::remove(f, ec);
        throw;
    }
}

Dataset read_dataset(const std::filesystem::path& dir)
{
    Dataset ds;
    ds.manifest = read_manifest(dir / "manifest.txt");
    for (std::size_t s = 0; s < ds.manifest.n_scenes; ++s) {
        const auto path = dir / shard_name(s);
        if (!std::filesystem::exists(path))
            throw DataError("dataset: missing shard " + path.string());
        decode_shard(binio::read_file(path.string()), ds.manifest.profile, ds.scenes, ds.samples);
    }
    for (std::size_t i = 0; i < ds.scenes.size(); ++i)
        if (ds.scenes[i].scene_id != i)
            throw DataError("dataset: scene ids are not contiguous");
    return ds;
}

Split split_dataset(const Dataset& ds, SplitScheme scheme, double train_fraction, std::uint64_t seed,
                    std::uint32_t scene_id, double val_fraction)
{
    if (!(train_fraction > 0.0 && train_fraction < 1.0) || val_fraction < 0.0 ||
        train_fraction + val_fraction >= 1.0)
        throw std::invalid_argument("split: fractions must leave room for a test set");
    Rng rng(stream_seed(seed, 0x73706c6974ULL, scheme == SplitScheme::CrossScene ? 1 : 2));
    Split out;
    auto cut = [&](std::size_t n, std::size_t& n_train, std::size_t& n_val) {
        n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
        n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
        n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
        n_val = std::min(n_val, n - 1 - n_train);
    };
    if (scheme == SplitScheme::CrossScene) {
        const std::size_t n = ds.scenes.size();
        if (n < 2)
            throw std::invalid_argument("split: cross-scene needs at least 2 scenes, dataset has " + std::to_string(n));
        std::vector<std::size_t> ids(n);
        for (std::size_t i = 0; i < n; ++i)
            ids[i] = i;
        rng.shuffle(ids);
        std::size_t n_train = 0, n_val = 0;
        cut(n, n_train, n_val);
        std::vector<int> side(n);
        for (std::size_t i = 0; i < n; ++i)
            side[ids[i]] = i < n_train ? 0 : (i < n_train + n_val ? 1 : 2);
        for (std::size_t k = 0; k < ds.samples.size(); ++k) {
            const int sd = side.at(ds.samples[k].scene_id);
            (sd == 0 ? out.train : sd == 1 ? out.val : out.test).push_back(k);
        }
        return out;
    }
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < ds.samples.size(); ++k)
        if (ds.samples[k].scene_id == scene_id)
            idx.push_back(k);
    if (idx.size() < 2)
        throw std::invalid_argument("split: scene " + std::to_string(scene_id) + " has fewer than 2 samples");
    rng.shuffle(idx);
    std::size_t n_train = 0, n_val = 0;
    cut(idx.size(), n_train, n_val);
    out.train.assign(idx.begin(), idx.begin() + n_train);
    out.val.assign(idx.begin() + n_train, idx.begin() + n_train + n_val);
    out.test.assign(idx.begin() + n_train + n_val, idx.end());
    return out;
}

} // namespace wfm
