#include "rdhte/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace rdhte {

CsvTable parse_csv(std::string_view text) {
  if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
      static_cast<unsigned char>(text[1]) == 0xBB && static_cast<unsigned char>(text[2]) == 0xBF)
    text.remove_prefix(3);

  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;     // inside quotes
  bool was_quoted = false; // current field started with a quote
  bool any = false;        // current record has content
  std::size_t line = 1;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    was_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(record));
    record.clear();
    any = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n')
          ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
    case '"':
      if (!field.empty() || was_quoted)
        throw Error(ErrorCode::ParseError,
                    "stray quote inside an unquoted field on line " + std::to_string(line));
      quoted = was_quoted = any = true;
      break;
    case ',':
      any = true;
      end_field();
      break;
    case '\r':
      if (i + 1 < text.size() && text[i + 1] == '\n')
        break;
      [[fallthrough]];
    case '\n':
      if (any || !field.empty())
        end_record();
      ++line;
      break;
    default:
      if (was_quoted)
        throw Error(ErrorCode::ParseError,
                    "characters after a closing quote on line " + std::to_string(line));
      field.push_back(c);
      any = true;
    }
  }
  if (quoted)
    throw Error(ErrorCode::ParseError, "unterminated quoted field");
  if (any || !field.empty())
    end_record();

  if (records.empty())
    throw Error(ErrorCode::ParseError, "CSV input has no header row");
  CsvTable out;
  out.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != out.header.size())
      throw Error(ErrorCode::ParseError, "data row " + std::to_string(r) + " has " +
                                             std::to_string(records[r].size()) +
                                             " fields, header has " +
                                             std::to_string(out.header.size()));
    out.rows.push_back(std::move(records[r]));
  }
  return out;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::ParseError, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

bool parse_double(std::string_view text, double& out) {
  if (text.empty())
    return false;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (*first == '+')
    ++first;
  if (first == last)
    return false;
  double v = 0.0;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last || !std::isfinite(v))
    return false;
  out = v;
  return true;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos)
    return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"')
      out += "\"\"";
    else
      out += c;
  }
  return out + "\"";
}

RawTable load_csv_text(std::string_view text, const std::vector<ColumnBinding>& bindings) {
  const CsvTable csv = parse_csv(text);
  RawTable out;
  for (const auto& b : bindings) {
    if (out.find(b.name))
      continue;
    std::size_t idx = csv.header.size();
    for (std::size_t j = 0; j < csv.header.size(); ++j)
      if (csv.header[j] == b.name) {
        idx = j;
        break;
      }
    if (idx == csv.header.size())
      throw Error(ErrorCode::MissingColumn, "column '" + b.name + "' not found in header");

    RawColumn col;
    col.name = b.name;
    col.text.reserve(csv.rows.size());
    col.numeric.reserve(csv.rows.size());
    col.is_numeric = true;
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
      const std::string& cell = csv.rows[r][idx];
      if (cell.empty())
        throw Error(ErrorCode::ParseError, "empty value at data row " + std::to_string(r + 1) +
                                               ", column '" + b.name + "'");
      double v = 0.0;
      if (col.is_numeric && parse_double(cell, v)) {
        col.numeric.push_back(v);
      } else {
        if (b.numeric)
          throw Error(ErrorCode::ParseError, "'" + cell + "' is not a finite number at data row " +
                                                 std::to_string(r + 1) + ", column '" + b.name +
                                                 "'");
        col.is_numeric = false;
      }
      col.text.push_back(cell);
    }
    if (!col.is_numeric)
      col.numeric.clear();
    out.columns.push_back(std::move(col));
  }
  return out;
}

RawTable load_csv(const std::string& path, const std::vector<ColumnBinding>& bindings) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::ParseError, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_csv_text(ss.str(), bindings);
}

} // namespace rdhte
