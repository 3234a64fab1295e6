#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace ideolens::csv {

using Row = std::vector<std::string>;

// RFC 4180 reader: quoted fields, doubled quotes, CRLF tolerated. Blank lines skipped.
std::vector<Row> parse(std::istream& in);

/// Loads a CSV file and checks the header row matches `header` exactly.
/// Returns data rows only. Every row must have header.size() fields.
std::vector<Row> load(const std::filesystem::path& path, const std::vector<std::string>& header);

std::string escape(std::string_view field);
std::string join(const Row& row);

}  // namespace ideolens::csv
