#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace glamor {

/// Shortest decimal form that parses back to the identical double.
std::string format_real(double value);

/// Fixed-point rendering with `digits` decimals, used by human-facing reports.
std::string format_fixed(double value, int digits);

/// Throws DataError (tagged with `line`) unless `token` is a complete finite real.
double parse_real(std::string_view token, std::size_t line = 0);
std::int64_t parse_int(std::string_view token, std::size_t line = 0);
std::size_t parse_size(std::string_view token, std::size_t line = 0);

std::vector<std::string_view> split(std::string_view text, char delimiter);
/// Splits on runs of spaces and tabs.
std::vector<std::string_view> split_whitespace(std::string_view text);
std::string_view trim(std::string_view text);

/// Reads lines while tracking 1-based line numbers for diagnostics.
class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  /// Next line with any trailing '\r' removed; false at end of input.
  bool next(std::string& line);
  std::size_t line_number() const noexcept { return line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

}  // namespace glamor
