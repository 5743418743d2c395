#include "lrgp/harness/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "lrgp/errors.hpp"

namespace lrgp::harness {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& raw, int line_no, int col_no) {
  const std::string cell = trim(raw);
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end || cell.empty()) {
    throw DataError("line " + std::to_string(line_no) + ": non-numeric cell '" +
                    cell + "' in column " + std::to_string(col_no + 1));
  }
  return value;
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& target_column) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": file is empty");
  const auto header = split_fields(line);
  if (header.size() < 2) {
    throw DataError(path + ": need at least one feature column and a target");
  }

  int target_idx = -1;
  if (target_column.empty()) {
    target_idx = static_cast<int>(header.size()) - 1;
  } else {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (trim(header[i]) == target_column) {
        target_idx = static_cast<int>(i);
        break;
      }
    }
    if (target_idx < 0) {
      throw DataError(path + ": target column '" + target_column + "' not found");
    }
  }

  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    std::vector<double> row(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      row[c] = parse_cell(fields[c], line_no, static_cast<int>(c));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path + ": no data rows");

  Dataset ds;
  const int n = static_cast<int>(rows.size());
  const int d = static_cast<int>(header.size()) - 1;
  ds.x.resize(n, d);
  ds.y.resize(n);
  ds.target_name = trim(header[target_idx]);
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (static_cast<int>(c) != target_idx) ds.feature_names.push_back(trim(header[c]));
  }
  for (int i = 0; i < n; ++i) {
    int fc = 0;
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (static_cast<int>(c) == target_idx) {
        ds.y(i) = rows[i][c];
      } else {
        ds.x(i, fc++) = rows[i][c];
      }
    }
  }
  return ds;
}

}  // namespace lrgp::harness
