// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint files: "WFMC", u16 version, then records of
// {u16 name length, name bytes, u8 rank, u32 dims[rank], f32 payload},
// all little-endian.
#pragma once

#include "wfm/tensor.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace wfm {

constexpr std::uint16_t kCheckpointVersion = 1;

struct CheckpointRecord {
    std::string name;
    Shape shape;
    std::vector<float> values;
};

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Writes to a temporary sibling and renames, so an existing file is replaced
/// only by a complete checkpoint.
void write_checkpoint(const std::filesystem::path& path, const std::vector<CheckpointRecord>& records);
std::vector<CheckpointRecord> read_checkpoint(const std::filesystem::path& path);

const CheckpointRecord& find_record(const std::vector<CheckpointRecord>& records, const std::string& name);

} // namespace wfm
