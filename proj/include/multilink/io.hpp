#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "multilink/comparison.hpp"
#include "multilink/synthetic.hpp"
#include "multilink/types.hpp"

namespace multilink {

// Minimal CSV dialect: comma separated, header row, UTF-8, LF endings on
// output. Cells containing commas, quotes, or newlines are double-quoted.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    Index column(const std::string& name) const; // -1 when absent
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

// Shortest decimal form that parses back to the same double; "inf", "-inf",
// and "nan" for the non-finite values.
std::string format_scalar(Scalar value);
Scalar parse_scalar(const std::string& text);

// One datafile: a record_id column (optional; row numbers otherwise) plus one
// column per declared field. Empty cells are missing values; numeric fields
// must parse as integers.
DataFile read_datafile(const std::filesystem::path& path,
                       const std::vector<FieldComparator>& fields, int file_id);
void write_datafile(const std::filesystem::path& path, const DataFile& file,
                    const std::vector<std::string>& field_names);

// Ground-truth key: columns file (1-based), record_id, entity_id.
using TruthKeys = std::map<std::pair<int, std::string>, std::int64_t>;

TruthKeys read_truth(const std::filesystem::path& path);
void write_truth(const std::filesystem::path& path, const std::vector<DataFile>& files,
                 const GroundTruth& truth);

} // namespace multilink
