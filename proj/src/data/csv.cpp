// SPDX-License-Identifier: Apache-2.0
#include "wfm/binio.hpp"
#include "wfm/data.hpp"

#include <sstream>

namespace wfm {

void write_repro_header(std::ostream& os, std::uint64_t config_hash, std::uint64_t seed)
{
    os << "# version=" << kToolVersion << ", config_hash=" << config_hash << ", seed=" << seed << '\n';
}

CsvWriter::CsvWriter(const std::filesystem::path& path, std::uint64_t config_hash, std::uint64_t seed,
                     const std::vector<std::string>& columns)
    : path_(path), ncols_(columns.size())
{
    std::ostringstream os;
    write_repro_header(os, config_hash, seed);
    buf_ = os.str();
    row(columns);
}

void CsvWriter::row(const std::vector<std::string>& cells)
{
    if (cells.size() != ncols_)
        throw std::invalid_argument("csv: row has " + std::to_string(cells.size()) + " cells, header has " +
                                    std::to_string(ncols_));
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i)
            buf_ += ',';
        buf_ += cells[i];
    }
    buf_ += '\n';
}

void CsvWriter::close()
{
    if (!path_.parent_path().empty())
        std::filesystem::create_directories(path_.parent_path());
    binio::write_file_atomic(path_.string(), std::vector<std::uint8_t>(buf_.begin(), buf_.end()));
}

} // namespace wfm
