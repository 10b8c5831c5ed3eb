// SPDX-License-Identifier: Apache-2.0
#include "wfm/checkpoint.hpp"

#include "wfm/binio.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>

namespace wfm {

namespace binio {

std::vector<std::uint8_t> read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open '" + path + "' for reading");
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file_atomic(const std::string& path, const std::vector<std::uint8_t>& data)
{
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot open '" + tmp + "' for writing");
        out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
        out.flush();
        if (!out) {
            out.close();
            std::remove(tmp.c_str());
            throw std::runtime_error("write failed for '" + tmp + "'");
        }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw std::runtime_error("cannot move '" + tmp + "' to '" + path + "'");
    }
}

} // namespace binio

void write_checkpoint(const std::filesystem::path& path, const std::vector<CheckpointRecord>& records)
{
    binio::Writer w;
    w.str("WFMC");
    w.u16(kCheckpointVersion);
    for (const auto& r : records) {
        if (r.name.size() > 0xffff)
            throw CheckpointError("checkpoint: record name too long");
        if (r.shape.size() > 0xff)
            throw CheckpointError("checkpoint: rank too large for '" + r.name + "'");
        if (shape_numel(r.shape) != r.values.size())
            throw CheckpointError("checkpoint: record '" + r.name + "' has " + std::to_string(r.values.size()) +
                                  " values for shape " + shape_str(r.shape));
        w.u16(static_cast<std::uint16_t>(r.name.size()));
        w.str(r.name);
        w.u8(static_cast<std::uint8_t>(r.shape.size()));
        for (auto d : r.shape)
            w.u32(static_cast<std::uint32_t>(d));
        w.bytes(r.values.data(), r.values.size() * sizeof(float));
    }
    binio::write_file_atomic(path.string(), w.buffer());
}

std::vector<CheckpointRecord> read_checkpoint(const std::filesystem::path& path)
{
    const auto data = binio::read_file(path.string());
    binio::Reader r(data.data(), data.size());
    try {
        if (r.str(4) != "WFMC")
            throw CheckpointError("checkpoint: bad magic in '" + path.string() + "'");
        const auto version = r.u16();
        if (version != kCheckpointVersion)
            throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
        std::vector<CheckpointRecord> out;
        while (r.remaining() > 0) {
            CheckpointRecord rec;
            rec.name = r.str(r.u16());
            const auto rank = r.u8();
            for (unsigned i = 0; i < rank; ++i)
                rec.shape.push_back(r.u32());
            rec.values.resize(shape_numel(rec.shape));
            r.bytes(rec.values.data(), rec.values.size() * sizeof(float));
            out.push_back(std::move(rec));
        }
        return out;
    } catch (const CheckpointError&) {
        throw;
    } catch (const std::runtime_error& e) {
        throw CheckpointError("checkpoint '" + path.string() + "': " + e.what());
    }
}

const CheckpointRecord& find_record(const std::vector<CheckpointRecord>& records, const std::string& name)
{
    for (const auto& r : records)
        if (r.name == name)
            return r;
    throw CheckpointError("checkpoint: missing record '" + name + "'");
}

} // namespace wfm
