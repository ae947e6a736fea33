#include "cops/io.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cops/error.hpp"

namespace cops::io {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) {
    const auto b = field.find_first_not_of(" \t");
    const auto e = field.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

double parse_number(const std::string& text, const std::filesystem::path& path, std::size_t line,
                    const std::string& column) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (text.empty() || ec != std::errc() || ptr != last || !std::isfinite(v))
    throw InputError(where(path, line) + "column '" + column + "' is not a finite number: '" + text + "'");
  return v;
}

}  // namespace

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::optional<std::size_t> CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  return std::nullopt;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path.string() + ": cannot open file");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto fields = split_fields(line);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size())
      throw InputError(where(path, line_no) + "expected " + std::to_string(table.header.size()) +
                       " fields, found " + std::to_string(fields.size()));
    table.rows.push_back(std::move(fields));
    table.lines.push_back(line_no);
  }
  if (!have_header) throw InputError(path.string() + ": missing header row");
  return table;
}

LoadedDataset read_dataset(const std::filesystem::path& path, const DatasetOptions& options) {
  const CsvTable table = read_csv(path);
  std::vector<std::size_t> feature_cols;
  for (int k = 0;; ++k) {
    const auto c = table.column("x" + std::to_string(k));
    if (!c) break;
    feature_cols.push_back(*c);
  }
  if (feature_cols.empty()) throw InputError(path.string() + ":1: header has no feature column x0");
  const auto y_col = options.read_labels ? table.column("y") : std::nullopt;
  if (options.require_labels && !y_col) throw InputError(path.string() + ":1: header has no label column y");
  std::optional<std::size_t> w_col;
  if (options.weights_column) {
    w_col = table.column(*options.weights_column);
    if (!w_col) throw InputError(path.string() + ":1: no weights column '" + *options.weights_column + "'");
  }
  if (table.rows.empty()) throw InputError(path.string() + ": no data rows");

  const auto n = static_cast<Eigen::Index>(table.rows.size());
  const auto d = static_cast<Eigen::Index>(feature_cols.size());
  RowMatrix x(n, d);
  std::vector<int> y;
  LoadedDataset out;
  int max_label = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    const std::size_t line = table.lines[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < d; ++j)
      x(i, j) = parse_number(row[feature_cols[static_cast<std::size_t>(j)]], path, line, "x" + std::to_string(j));
    if (y_col) {
      const std::string& t = row[*y_col];
      int label = 0;
      auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), label);
      if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || label < 0)
        throw InputError(where(path, line) + "label '" + t + "' is not a nonnegative integer");
      if (options.classes && label > *options.classes)
        throw InputError(where(path, line) + "label " + t + " exceeds K = " + std::to_string(*options.classes));
      max_label = std::max(max_label, label);
      y.push_back(label);
    }
    if (w_col) {
      const double w = parse_number(row[*w_col], path, line, *options.weights_column);
      if (w < 0.0) throw InputError(where(path, line) + "negative weight");
      out.weights.push_back(w);
    }
  }
  const int classes = options.classes.value_or(std::max(1, max_label));
  out.data = y_col ? Dataset::labeled(std::move(x), std::move(y), classes) : Dataset::unlabeled(std::move(x), classes);
  return out;
}

std::string dataset_to_csv(const Dataset& data) {
  std::string s;
  for (int j = 0; j < data.dim(); ++j) s += (j ? ",x" : "x") + std::to_string(j);
  if (data.is_labeled()) s += ",y";
  s += '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = data.row(i);
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (j) s += ',';
      s += format_double(x[j]);
    }
    if (data.is_labeled()) s += "," + std::to_string(data.label(i));
    s += '\n';
  }
  return s;
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(tmp.string() + ": cannot open for writing");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error(tmp.string() + ": write failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("rename " + tmp.string() + " -> " + path.string() + ": " + ec.message());
}

std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < std::min(offset, text.size()); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

}  // namespace cops::io
