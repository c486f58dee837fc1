#include "covsim/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "fmt/core.h"

#include "covsim/types.hpp"

namespace covsim {

std::string_view to_string(mode const m) {
  switch (m) {
    case mode::car: return "car";
    case mode::transit: return "transit";
    case mode::walk: return "walk";
    case mode::bike: return "bike";
    case mode::ridehail: return "ridehail";
    case mode::bikeshare: return "bikeshare";
  }
  return "?";
}

std::optional<mode> parse_mode(std::string_view const s) {
  for (auto const m : kAllModes) {
    if (to_string(m) == s) {
      return m;
    }
  }
  return std::nullopt;
}

parse_error::parse_error(std::string file, std::size_t const line,
                         std::string const& what)
    : error{fmt::format("{}:{}: {}", file, line, what)},
      file_{std::move(file)},
      line_{line} {}

parse_error::parse_error(std::string file, std::string const& what)
    : error{fmt::format("{}: {}", file, what)}, file_{std::move(file)} {}

csv_table csv_table::read(std::filesystem::path const& path) {
  std::ifstream in{path, std::ios::binary};
  if (!in) {
    throw parse_error{path.string(), "cannot open file"};
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

csv_table csv_table::parse(std::string_view const text,
                           std::string source_name) {
  csv_table t;
  t.source_ = std::move(source_name);

  std::size_t line = 1;
  std::size_t pos = 0;
  bool first = true;

  // Skip UTF-8 BOM.
  if (text.substr(0, 3) == "\xEF\xBB\xBF") {
    pos = 3;
  }

  while (pos < text.size()) {
    std::size_t const row_line = line;
    std::vector<std::string> fields;
    std::string cur;
    bool in_quotes = false;
    bool row_done = false;
    while (pos < text.size() && !row_done) {
      char const c = text[pos];
      if (in_quotes) {
        if (c == '"') {
          if (pos + 1 < text.size() && text[pos + 1] == '"') {
            cur += '"';
            pos += 2;
            continue;
          }
          in_quotes = false;
        } else {
          if (c == '\n') {
            ++line;
          }
          cur += c;
        }
        ++pos;
        continue;
      }
      switch (c) {
        case '"': in_quotes = true; break;
        case ',':
          fields.push_back(std::move(cur));
          cur.clear();
          break;
        case '\r': break;
        case '\n':
          ++line;
          row_done = true;
          break;
        default: cur += c;
      }
      ++pos;
    }
    if (in_quotes) {
      throw parse_error{t.source_, row_line, "unterminated quoted field"};
    }
    fields.push_back(std::move(cur));
    if (fields.size() == 1 && fields[0].empty()) {
      continue;
    }
    if (first) {
      for (auto& h : fields) {
        while (!h.empty() && (h.back() == ' ' || h.back() == '\t')) {
          h.pop_back();
        }
      }
      t.header_ = std::move(fields);
      for (std::size_t i = 0; i < t.header_.size(); ++i) {
        t.index_.emplace(t.header_[i], i);
      }
      first = false;
      continue;
    }
    if (fields.size() != t.header_.size()) {
      throw parse_error{t.source_, row_line,
                        fmt::format("expected {} fields, found {}",
                                    t.header_.size(), fields.size())};
    }
    t.rows_.push_back(row{row_line, std::move(fields)});
  }
  if (first) {
    throw parse_error{t.source_, 1, "missing header row"};
  }
  return t;
}

bool csv_table::has_column(std::string_view const name) const {
  return index_.contains(std::string{name});
}

std::optional<std::size_t> csv_table::find_column(
    std::string_view const name) const {
  auto const it = index_.find(std::string{name});
  if (it == end(index_)) {
    return std::nullopt;
  }
  return it->second;
}

std::size_t csv_table::column(std::string_view const name) const {
  auto const c = find_column(name);
  if (!c) {
    throw parse_error{source_, 1,
                      fmt::format("missing required column '{}'", name)};
  }
  return *c;
}

std::string const& csv_table::str(row const& r, std::size_t const col) const {
  return r.fields.at(col);
}

double csv_table::number(row const& r, std::size_t const col) const {
  auto const& s = r.fields.at(col);
  double v = 0.0;
  auto const* const b = s.data();
  auto const* const e = s.data() + s.size();
  auto const [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc{} || ptr != e || s.empty()) {
    throw parse_error{source_, r.line,
                      fmt::format("column '{}': '{}' is not a number",
                                  header_[col], s)};
  }
  return v;
}

long long csv_table::integer(row const& r, std::size_t const col) const {
  auto const& s = r.fields.at(col);
  long long v = 0;
  auto const* const b = s.data();
  auto const* const e = s.data() + s.size();
  auto const [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc{} || ptr != e || s.empty()) {
    throw parse_error{source_, r.line,
                      fmt::format("column '{}': '{}' is not an integer",
                                  header_[col], s)};
  }
  return v;
}

std::string format_double(double const v) {
  char buf[64];
  auto const [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string csv_escape(std::string_view const field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) {
    return std::string{field};
  }
  std::string out = "\"";
  for (char const c : field) {
    if (c == '"') {
      out += '"';
    }
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace covsim
