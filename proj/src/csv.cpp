#include "ifnet/csv.hpp"

#include "ifnet/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ifnet::csv {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

Writer::Writer(std::vector<std::string> header) : width_(header.size()) {
  if (header.empty()) throw ParameterError("csv: empty header");
  row(header);
}

void Writer::row(const std::vector<std::string>& fields) {
  if (fields.size() != width_) throw ParameterError("csv: row width does not match header");
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (fields[i].find_first_of(",\n\r") != std::string::npos) throw ParameterError("csv: field contains a separator");
    if (i) text_ += ',';
    text_ += fields[i];
  }
  text_ += '\n';
}

void Writer::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParameterError("csv: cannot write " + path.string());
  out << text_;
}

std::size_t Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw ParseError("csv: missing column " + name, 1);
}

bool Table::has(const std::string& name) const {
  for (const std::string& h : header) {
    if (h == name) return true;
  }
  return false;
}

double Table::number(std::size_t row, std::size_t col) const {
  const std::string& s = rows.at(row).at(col);
  const int line = static_cast<int>(row) + 2;
  if (s == "nan") return std::nan("");
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ParseError("csv: not a number '" + s + "' in column " + header.at(col), line);
  }
  return v;
}

Table parse(const std::string& text) {
  Table t;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      if (line_no == 1) throw ParseError("csv: empty header", 1);
      continue;
    }
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (t.header.empty()) {
      t.header = std::move(fields);
    } else if (fields.size() != t.header.size()) {
      throw ParseError("csv: expected " + std::to_string(t.header.size()) + " fields, found " +
                           std::to_string(fields.size()),
                       line_no);
    } else {
      t.rows.push_back(std::move(fields));
    }
  }
  if (t.header.empty()) throw ParseError("csv: empty input", 1);
  return t;
}

Table read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParameterError("csv: cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

}  // namespace ifnet::csv
