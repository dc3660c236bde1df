#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ddepth {

/// Raised when a geometric precondition fails (point behind the camera, degenerate PnP, ...).
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Text-format parse failure with a 1-based line and column.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : std::runtime_error("line " + std::to_string(line) + ", column " +
                           std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Invalid experiment or scene configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ddepth
