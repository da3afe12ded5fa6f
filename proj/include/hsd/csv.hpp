#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace hsd::csv {

using Row = std::vector<std::string>;

struct Table {
    Row header;
    std::vector<Row> rows;

    // Index of a header column; -1 if absent.
    [[nodiscard]] int column(std::string_view name) const;
};

// RFC 4180 reader: quoted fields may hold commas, quotes ("") and newlines.
// A UTF-8 BOM on the first line is dropped. Blank lines are skipped.
Table parse(std::string_view content);
Table read_file(const std::filesystem::path& path);

std::string quote(std::string_view field);
void write_row(std::ostream& out, const Row& row);
void write_file(const std::filesystem::path& path, const Table& table);

}  // namespace hsd::csv
