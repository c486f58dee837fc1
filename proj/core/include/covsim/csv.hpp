#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace covsim {

// Minimal RFC 4180 reader: header row, quoted fields, CRLF tolerant, blank
// lines skipped. Rows keep the physical line they started on for messages.
class csv_table {
public:
  struct row {
    std::size_t line;
    std::vector<std::string> fields;
  };

  static csv_table read(std::filesystem::path const& path);
  static csv_table parse(std::string_view text, std::string source_name);

  std::string const& source() const { return source_; }
  std::vector<std::string> const& header() const { return header_; }
  std::vector<row> const& rows() const { return rows_; }

  bool has_column(std::string_view name) const;
  // Throws parse_error naming the file if the column is absent.
  std::size_t column(std::string_view name) const;
  std::optional<std::size_t> find_column(std::string_view name) const;

  // Field accessors throwing parse_error with the row's line number.
  std::string const& str(row const& r, std::size_t col) const;
  double number(row const& r, std::size_t col) const;
  long long integer(row const& r, std::size_t col) const;

private:
  std::string source_;
  std::vector<std::string> header_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<row> rows_;
};

// Shortest decimal text that reads back to the identical double.
std::string format_double(double v);

// Quotes a field only when it contains a separator, quote or newline.
std::string csv_escape(std::string_view field);

}  // namespace covsim
