#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vub {

enum class FormatErrorKind {
  io,
  malformed_header,
  row_length,
  bad_number,
  label_out_of_range,
  row_count,
  bad_magic,
  truncated,
};

/// Parse failure in one of the on-disk formats. `line` is 1-based for text
/// formats and 0 when not applicable (binary files, I/O errors).
class FormatError : public std::runtime_error {
 public:
  FormatError(FormatErrorKind kind, std::size_t line, const std::string& message);

  FormatErrorKind kind() const { return kind_; }
  std::size_t line() const { return line_; }

 private:
  FormatErrorKind kind_;
  std::size_t line_;
};

namespace text {

std::vector<std::string_view> split_commas(std::string_view line);

/// Parses a finite double; throws FormatError(bad_number) citing `line`.
double parse_double(std::string_view field, std::size_t line);

/// Parses a non-negative integer; throws FormatError(bad_number) citing `line`.
long long parse_integer(std::string_view field, std::size_t line);

/// 17 significant digits; round-trips any double exactly.
std::string format_double(double v);

}  // namespace text

}  // namespace vub
