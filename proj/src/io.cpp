#include "multilink/io.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "multilink/error.hpp"

namespace multilink {

namespace {

std::string location(const std::filesystem::path& path, std::size_t line) {
    return path.string() + ":" + std::to_string(line);
}

bool needs_quotes(const std::string& cell) {
    return cell.find_first_of(",\"\n\r") != std::string::npos;
}

void append_cell(std::string& out, const std::string& cell) {
    if (!needs_quotes(cell)) {
        out += cell;
        return;
    }
    out += '"';
    for (char c : cell) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
}

// Splits one physical-or-logical CSV record; quoted cells may span lines, so
// the caller hands in a getline callback to fetch continuations.
std::vector<std::string> parse_record(const std::string& first, std::istream& in,
                                      const std::filesystem::path& path, std::size_t& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::string text = first;
    bool quoted = false;
    std::size_t i = 0;
    while (true) {
        if (i == text.size()) {
            if (!quoted) break;
            std::string more;
            if (!std::getline(in, more))
                throw InputError("unterminated quoted cell at " + location(path, line));
            ++line;
            cell += '\n';
            text = more;
            i = 0;
            continue;
        }
        char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell += c;
            }
        } else if (c == '"' && cell.empty()) {
            quoted = true;
        } else if (c == ',') {
            cells.push_back(std::move(cell));
            cell.clear();
        } else if (c == '\r' && i + 1 == text.size()) {
            // tolerate CRLF input
        } else {
            cell += c;
        }
        ++i;
    }
    cells.push_back(std::move(cell));
    return cells;
}

std::int64_t parse_int(const std::string& cell, const std::string& context) {
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc{} || ptr != cell.data() + cell.size())
        throw InputError("expected an integer, got \"" + cell + "\" " + context);
    return value;
}

} // namespace

Index CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<Index>(i);
    return -1;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    CsvTable table;
    std::string text;
    std::size_t line = 0;
    if (!std::getline(in, text)) throw InputError("empty CSV file " + path.string());
    ++line;
    table.header = parse_record(text, in, path, line);
    while (std::getline(in, text)) {
        ++line;
        if (text.empty() && in.peek() == std::char_traits<char>::eof()) break;
        auto cells = parse_record(text, in, path, line);
        if (cells.size() != table.header.size())
            throw InputError("row with " + std::to_string(cells.size()) + " cells, expected " +
                             std::to_string(table.header.size()) + " at " + location(path, line));
        table.rows.push_back(std::move(cells));
    }
    return table;
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
    std::string out;
    auto emit = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            append_cell(out, cells[i]);
        }
        out += '\n';
    };
    emit(table.header);
    for (const auto& row : table.rows) {
        if (row.size() != table.header.size())
            throw InputError("ragged CSV row while writing " + path.string());
        emit(row);
    }
    std::ofstream file(path, std::ios::binary);
    if (!file) throw InputError("cannot write " + path.string());
    file << out;
    if (!file) throw InputError("failed writing " + path.string());
}

std::string format_scalar(Scalar value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    (void)ec;
    return std::string(buf, ptr);
}

Scalar parse_scalar(const std::string& text) {
    if (text == "inf") return std::numeric_limits<Scalar>::infinity();
    if (text == "-inf") return -std::numeric_limits<Scalar>::infinity();
    if (text == "nan") return std::numeric_limits<Scalar>::quiet_NaN();
    Scalar value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw InputError("expected a number, got \"" + text + "\"");
    return value;
}

DataFile read_datafile(const std::filesystem::path& path,
                       const std::vector<FieldComparator>& fields, int file_id) {
    CsvTable csv = read_csv(path);
    Index id_col = csv.column("record_id");
    std::vector<Index> field_cols(fields.size());
    for (std::size_t f = 0; f < fields.size(); ++f) {
        field_cols[f] = csv.column(fields[f].name);
        if (field_cols[f] < 0)
            throw InputError("missing column \"" + fields[f].name + "\" in " + path.string());
    }

    DataFile file;
    file.file_id = file_id;
    file.records.reserve(csv.rows.size());
    std::set<std::string> seen;
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        const auto& row = csv.rows[r];
        Record record;
        record.record_id = id_col >= 0 ? row[id_col] : std::to_string(r + 1);
        if (!seen.insert(record.record_id).second)
            throw InputError("duplicate record_id \"" + record.record_id + "\" in " + path.string());
        record.values.reserve(fields.size());
        for (std::size_t f = 0; f < fields.size(); ++f) {
            const std::string& cell = row[field_cols[f]];
            if (cell.empty()) {
                record.values.emplace_back(std::monostate{});
            } else if (fields[f].numeric) {
                record.values.emplace_back(parse_int(
                    cell, "for field \"" + fields[f].name + "\" in " + location(path, r + 2)));
            } else {
                record.values.emplace_back(cell);
            }
        }
        file.records.push_back(std::move(record));
    }
    return file;
}

void write_datafile(const std::filesystem::path& path, const DataFile& file,
                    const std::vector<std::string>& field_names) {
    CsvTable csv;
    csv.header.push_back("record_id");
    csv.header.insert(csv.header.end(), field_names.begin(), field_names.end());
    for (const auto& record : file.records) {
        if (record.values.size() != field_names.size())
            throw InputError("record \"" + record.record_id + "\" has " +
                             std::to_string(record.values.size()) + " values, expected " +
                             std::to_string(field_names.size()));
        std::vector<std::string> row;
        row.push_back(record.record_id);
        for (const Value& v : record.values) {
            if (is_missing(v))
                row.emplace_back();
            else if (const auto* n = std::get_if<std::int64_t>(&v))
                row.push_back(std::to_string(*n));
            else
                row.push_back(std::get<std::string>(v));
        }
        csv.rows.push_back(std::move(row));
    }
    write_csv(path, csv);
}

TruthKeys read_truth(const std::filesystem::path& path) {
    CsvTable csv = read_csv(path);
    Index file_col = csv.column("file");
    Index id_col = csv.column("record_id");
    Index entity_col = csv.column("entity_id");
    if (file_col < 0 || id_col < 0 || entity_col < 0)
        throw InputError("truth file " + path.string() +
                         " needs columns file, record_id, entity_id");
    TruthKeys keys;
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        const auto& row = csv.rows[r];
        std::string context = "at " + location(path, r + 2);
        int file = static_cast<int>(parse_int(row[file_col], context));
        std::int64_t entity = parse_int(row[entity_col], context);
        if (!keys.emplace(std::make_pair(file, row[id_col]), entity).second)
            throw InputError("duplicate truth key (" + row[file_col] + ", " + row[id_col] + ") " +
                             context);
    }
    return keys;
}

void write_truth(const std::filesystem::path& path, const std::vector<DataFile>& files,
                 const GroundTruth& truth) {
    if (files.size() != truth.entity_ids.size())
        throw DimensionError("truth covers " + std::to_string(truth.entity_ids.size()) +
                             " files, data has " + std::to_string(files.size()));
    CsvTable csv;
    csv.header = {"file", "record_id", "entity_id"};
    for (std::size_t k = 0; k < files.size(); ++k) {
        if (files[k].records.size() != truth.entity_ids[k].size())
            throw DimensionError("file " + std::to_string(k + 1) + " size mismatch with truth");
        for (std::size_t r = 0; r < files[k].records.size(); ++r)
            csv.rows.push_back({std::to_string(k + 1), files[k].records[r].record_id,
                                std::to_string(truth.entity_ids[k][r])});
    }
    write_csv(path, csv);
}

} // namespace multilink
