#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace ifnet::csv {

/// Shortest decimal that round-trips; locale independent so files are byte-stable.
std::string num(double v);

/// Comma-separated, header first, LF line endings. Fields must not contain commas.
class Writer {
 public:
  explicit Writer(std::vector<std::string> header);
  void row(const std::vector<std::string>& fields);
  const std::string& text() const { return text_; }
  void save(const std::filesystem::path& path) const;

 private:
  std::size_t width_;
  std::string text_;
};

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column position; throws ParseError if absent.
  std::size_t column(const std::string& name) const;
  bool has(const std::string& name) const;
  /// Numeric cell; ParseError names the 1-based file line.
  double number(std::size_t row, std::size_t col) const;
};

/// Throws ParseError with the 1-based line on ragged rows or an empty header.
Table parse(const std::string& text);
Table read(const std::filesystem::path& path);

}  // namespace ifnet::csv
