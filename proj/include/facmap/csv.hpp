#pragma once

#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace facmap::csv {

using Row = std::vector<std::string>;

/// Splits one RFC 4180 record. Quoted fields may contain commas and doubled quotes
/// but not newlines.
Row split_line(std::string_view line);

/// Quotes a field only when it contains a comma, quote, or newline.
std::string escape(std::string_view field);
void write_row(std::ostream& out, const Row& fields);

/// A parsed CSV file with a header row; cells addressed by column name.
class Table {
 public:
  /// Requires every name in `required` to appear in the header.
  static Table read(std::istream& in, const std::vector<std::string>& required,
                    const std::string& source_name = "csv");
  static Table read_file(const std::filesystem::path& path,
                         const std::vector<std::string>& required);

  const Row& header() const { return header_; }
  std::size_t size() const { return rows_.size(); }
  const std::string& cell(std::size_t row, const std::string& column) const;
  /// 1-based line number of a data row, for diagnostics.
  std::size_t line_of(std::size_t row) const { return lines_[row]; }
  const std::string& source() const { return source_; }

 private:
  std::string source_;
  Row header_;
  std::unordered_map<std::string, std::size_t> columns_;
  std::vector<Row> rows_;
  std::vector<std::size_t> lines_;
};

/// Full-precision (round-trippable) decimal text for a double.
std::string format_double(double v);
/// Strict parse; throws ValidationError naming `what` on failure.
double parse_double(const std::string& text, const std::string& what);
long long parse_int(const std::string& text, const std::string& what);

}  // namespace facmap::csv
