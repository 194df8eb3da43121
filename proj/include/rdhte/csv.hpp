#pragma once

#include "rdhte/model.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace rdhte {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// RFC 4180 style: comma separated, double-quote quoting with "" escapes,
// CRLF or LF line ends. A leading UTF-8 BOM is dropped. The first record is
// the header; every record must have as many fields as the header.
CsvTable parse_csv(std::string_view text);

CsvTable read_csv_file(const std::string& path);

// Strict decimal parse of the whole field; rejects non-finite values.
bool parse_double(std::string_view text, double& out);

// Shortest representation that round-trips.
std::string format_double(double v);

// Quotes a field when it contains a comma, quote or line break.
std::string csv_escape(std::string_view field);

struct ColumnBinding {
  std::string name;
  bool numeric = false; // parse failure is an error when true
};

// Loads the bound columns of a CSV file into a typed table.
// Errors: MissingColumn, ParseError (with 1-based data row and column name).
RawTable load_csv(const std::string& path, const std::vector<ColumnBinding>& bindings);
RawTable load_csv_text(std::string_view text, const std::vector<ColumnBinding>& bindings);

} // namespace rdhte
