#include "ild/csv.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace ild {
namespace {

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell.push_back(ch);
      }
    } else if (ch == '"' && cell.empty()) {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(cell);
      cell.clear();
    } else if (ch != '\r') {
      cell.push_back(ch);
    }
  }
  out.push_back(cell);
  return out;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  errno = 0;
  char* end = nullptr;
  out = std::strtod(t.c_str(), &end);
  return end == t.c_str() + t.size() && errno != ERANGE;
}

bool parse_long(const std::string& s, long long& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  return ec == std::errc{} && p == t.data() + t.size();
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += "\"\"";
    else q.push_back(ch);
  }
  q.push_back('"');
  return q;
}

}  // namespace

Dataset read_csv_dataset(const std::string& path, const std::string& label_col) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  const auto header = split_row(line);
  if (header.size() < 2)
    throw std::runtime_error(path + ": need at least one feature and a label column");

  int label_idx = -1;
  for (size_t j = 0; j < header.size(); ++j)
    if (trim(header[j]) == label_col) label_idx = static_cast<int>(j);
  if (label_idx < 0) {
    long long idx = 0;
    if (parse_long(label_col, idx) && idx >= 0 &&
        idx < static_cast<long long>(header.size()))
      label_idx = static_cast<int>(idx);
  }
  if (label_idx < 0)
    throw std::runtime_error(path + ": no label column '" + label_col + "'");

  const int num_cols = static_cast<int>(header.size());
  const int d = num_cols - 1;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> raw_labels;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_row(line);
    if (static_cast<int>(cells.size()) != num_cols)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected " + std::to_string(num_cols) +
                               " cells, got " + std::to_string(cells.size()));
    std::vector<double> row;
    row.reserve(d);
    for (int j = 0; j < num_cols; ++j) {
      if (j == label_idx) {
        raw_labels.push_back(trim(cells[j]));
        continue;
      }
      double v = 0.0;
      if (!parse_double(cells[j], v) || !std::isfinite(v))
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": non-finite or non-numeric value '" +
                                 cells[j] + "' in column " + trim(header[j]));
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error(path + ": no data rows");

  // contiguous label ids: numeric label sets sort numerically
  std::vector<std::string> uniq = raw_labels;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  bool all_numeric = true;
  std::vector<std::pair<long long, std::string>> numeric;
  for (const auto& s : uniq) {
    long long v = 0;
    if (!parse_long(s, v)) {
      all_numeric = false;
      break;
    }
    numeric.emplace_back(v, s);
  }
  if (all_numeric) {
    std::sort(numeric.begin(), numeric.end());
    for (size_t k = 0; k < numeric.size(); ++k) uniq[k] = numeric[k].second;
  }
  std::map<std::string, int> label_id;
  for (size_t k = 0; k < uniq.size(); ++k) label_id[uniq[k]] = static_cast<int>(k);
  if (uniq.size() < 2) throw std::runtime_error(path + ": need at least 2 classes");

  const int n = static_cast<int>(rows.size());
  Eigen::MatrixXd x(n, d);
  std::vector<int> y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = rows[i][j];
    y[i] = label_id.at(raw_labels[i]);
  }
  std::vector<std::string> feature_names;
  for (int j = 0; j < num_cols; ++j)
    if (j != label_idx) feature_names.push_back(trim(header[j]));

  Dataset ds = make_dataset(std::move(x), std::move(y),
                            static_cast<int>(uniq.size()));
  ds.feature_names = std::move(feature_names);
  ds.label_names = std::move(uniq);
  return ds;
}

void write_csv_dataset(const Dataset& ds, const std::string& path,
                       const std::string& label_name) {
  std::ostringstream out;
  out.precision(17);
  for (int j = 0; j < ds.dim(); ++j) {
    const std::string name = j < static_cast<int>(ds.feature_names.size())
                                 ? ds.feature_names[j]
                                 : "x" + std::to_string(j);
    out << csv_quote(name) << ',';
  }
  out << csv_quote(label_name) << '\n';
  for (int i = 0; i < ds.n(); ++i) {
    for (int j = 0; j < ds.dim(); ++j) out << ds.x(i, j) << ',';
    if (ds.y[i] < static_cast<int>(ds.label_names.size()))
      out << csv_quote(ds.label_names[ds.y[i]]);
    else
      out << ds.y[i];
    out << '\n';
  }
  atomic_write_text(path, out.str());
}

void atomic_write_text(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw std::runtime_error("rename failed: " + path + " (" +
                             std::strerror(errno) + ")");
  }
}

}  // namespace ild
