// SPDX-License-Identifier: Apache-2.0
#include "wfm/binio.hpp"
#include "wfm/data.hpp"

#include <zlib.h>

namespace wfm {

std::uint32_t crc32(const std::uint8_t* data, std::size_t n)
{
    uLong c = ::crc32(0L, Z_NULL, 0);
    while (n > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
        c = ::crc32(c, data, chunk);
        data += chunk;
        n -= chunk;
    }
    return static_cast<std::uint32_t>(c);
}

std::vector<std::uint8_t> encode_shard(const Profile& p, const std::vector<SceneMap>& scenes,
                                       const std::vector<ChannelSample>& samples)
{
    binio::Writer w;
    w.str("WFMD");
    w.u16(kShardVersion);
    w.u16(static_cast<std::uint16_t>(p.n_x));
    w.u16(static_cast<std::uint16_t>(p.n_y));
    w.u32(static_cast<std::uint32_t>(scenes.size()));
    w.u32(static_cast<std::uint32_t>(samples.size()));
    for (const auto& s : scenes) {
        w.u32(s.scene_id);
        w.u16(static_cast<std::uint16_t>(s.n));
        for (float h : s.heights)
            w.f32(h);
    }
    for (const auto& s : samples) {
        if (s.H.cols() != p.n_t())
            throw DataError("shard: sample has " + std::to_string(s.H.cols()) + " transmit antennas, profile expects " +
                            std::to_string(p.n_t()));
        w.u32(s.scene_id);
        w.f32(static_cast<float>(s.rx_x));
        w.f32(static_cast<float>(s.rx_y));
        w.u8(static_cast<std::uint8_t>(s.H.rows()));
        for (std::size_t r = 0; r < s.H.rows(); ++r)
            for (std::size_t t = 0; t < s.H.cols(); ++t) {
                w.f32(static_cast<float>(s.H(r, t).real()));
                w.f32(static_cast<float>(s.H(r, t).imag()));
            }
    }
    const auto& b = w.buffer();
    w.u32(crc32(b.data(), b.size()));
    return w.buffer();
}

void decode_shard(const std::vector<std::uint8_t>& bytes, const Profile& p, std::vector<SceneMap>& scenes,
                  std::vector<ChannelSample>& samples)
{
    if (bytes.size() < 4 + 2 + 2 + 2 + 4 + 4 + 4)
        throw DataError("shard: file too short");
    const std::size_t body = bytes.size() - 4;
    std::uint32_t stored = 0;
    std::memcpy(&stored, bytes.data() + body, 4);
    if (stored != crc32(bytes.data(), body))
        throw DataError("shard: CRC mismatch");
    binio::Reader r(bytes.data(), body);
    if (r.str(4) != "WFMD")
        throw DataError("shard: bad magic");
    if (const auto v = r.u16(); v != kShardVersion)
        throw DataError("shard: unsupported version " + std::to_string(v));
    const std::size_t nx = r.u16(), ny = r.u16();
    if (nx != p.n_x || ny != p.n_y)
        throw DataError("shard: array " + std::to_string(nx) + "x" + std::to_string(ny) + " does not match profile");
    const std::size_t n_scenes = r.u32(), n_samples = r.u32();
    for (std::size_t i = 0; i < n_scenes; ++i) {
        SceneMap s;
        s.scene_id = r.u32();
        s.n = r.u16();
        if (s.n != p.grid_n)
            throw DataError("shard: scene grid does not match profile");
        s.cell_m = p.cell_m;
        s.bs = bs_position(s.n, s.cell_m, p.bs_height_m);
        s.heights.resize(s.n * s.n);
        for (auto& h : s.heights)
            h = r.f32();
        scenes.push_back(std::move(s));
    }
    const std::size_t nt = nx * ny;
    for (std::size_t i = 0; i < n_samples; ++i) {
        ChannelSample s;
        s.scene_id = r.u32();
        s.rx_x = r.f32();
        s.rx_y = r.f32();
        const std::size_t nr = r.u8();
        s.H = ComplexMatrix(nr, nt);
        for (std::size_t a = 0; a < nr; ++a)
            for (std::size_t t = 0; t < nt; ++t) {
                const double re = r.f32();
                const double im = r.f32();
                s.H(a, t) = cd(re, im);
            }
        samples.push_back(std::move(s));
    }
    if (r.remaining() != 0)
        throw DataError("shard: " + std::to_string(r.remaining()) + " trailing bytes");
}

} // namespace wfm
