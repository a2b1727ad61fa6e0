#include "facmap/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "facmap/errors.hpp"

namespace facmap::csv {

Row split_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  Row fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (quoted) throw ValidationError("csv: unterminated quoted field");
  fields.push_back(std::move(current));
  return fields;
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, const Row& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << escape(fields[i]);
  }
  out << '\n';
}

Table Table::read(std::istream& in, const std::vector<std::string>& required,
                  const std::string& source_name) {
  Table t;
  t.source_ = source_name;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = split_line(line);
    if (!have_header) {
      // Tolerate a UTF-8 byte order mark on the header.
      if (!fields.empty() && fields[0].rfind("\xEF\xBB\xBF", 0) == 0) fields[0].erase(0, 3);
      t.header_ = fields;
      for (std::size_t i = 0; i < fields.size(); ++i) t.columns_.emplace(fields[i], i);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header_.size())
      throw ValidationError(source_name + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(t.header_.size()) + " fields, got " +
                            std::to_string(fields.size()));
    t.rows_.push_back(std::move(fields));
    t.lines_.push_back(line_no);
  }
  if (!have_header) throw ValidationError(source_name + ": missing header row");
  for (const auto& name : required)
    if (!t.columns_.contains(name))
      throw ValidationError(source_name + ": missing column '" + name + "'");
  return t;
}

Table Table::read_file(const std::filesystem::path& path,
                       const std::vector<std::string>& required) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open " + path.string());
  return read(in, required, path.string());
}

const std::string& Table::cell(std::size_t row, const std::string& column) const {
  const auto it = columns_.find(column);
  if (it == columns_.end()) throw ValidationError(source_ + ": no column '" + column + "'");
  return rows_.at(row)[it->second];
}

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw ValidationError("format_double failed");
  return std::string(buf, end);
}

double parse_double(const std::string& text, const std::string& what) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || !std::isfinite(v))
    throw ValidationError(what + ": not a number: '" + text + "'");
  return v;
}

long long parse_int(const std::string& text, const std::string& what) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw ValidationError(what + ": not an integer: '" + text + "'");
  return v;
}

}  // namespace facmap::csv
