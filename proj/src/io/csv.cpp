#include "sfe/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sfe/error.hpp"

namespace sfe::io {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_number(const std::string& cell, double& value) {
  if (cell.empty()) return false;
  const char* first = cell.data();
  const char* last = first + cell.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  return ec == std::errc() && ptr == last && std::isfinite(value);
}

std::ifstream open(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path);
  return in;
}

bool skip(const std::string& line) {
  const std::string t = trim(line);
  return t.empty() || t.front() == '#';
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CsvTable parse_csv(std::istream& in, const std::string& source) {
  CsvTable table;
  std::vector<double> values;
  std::string line;
  long lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (skip(line)) continue;
    auto cells = split(line);
    if (!have_header) {
      double probe;
      if (std::any_of(cells.begin(), cells.end(), [&](const std::string& c) { return parse_number(c, probe); }))
        throw ParseError(source, lineno, "missing header row");
      if (std::any_of(cells.begin(), cells.end(), [](const std::string& c) { return c.empty(); }))
        throw ParseError(source, lineno, "empty column name in header");
      table.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != table.header.size())
      throw ParseError(source, lineno,
                       "expected " + std::to_string(table.header.size()) + " columns, found " + std::to_string(cells.size()));
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v;
      if (!parse_number(cells[c], v)) throw ParseError(source, lineno, "column '" + table.header[c] + "': not a finite number: '" + cells[c] + "'");
      values.push_back(v);
    }
  }
  if (!have_header) throw ParseError(source, lineno, "empty file");
  const auto ncol = static_cast<Eigen::Index>(table.header.size());
  table.rows = Eigen::Map<RowMat>(values.data(), static_cast<Eigen::Index>(values.size()) / ncol, ncol);
  return table;
}

CsvTable read_csv(const std::string& path) {
  auto in = open(path);
  return parse_csv(in, path);
}

DiscreteMeasure LoadedMeasure::measure() const {
  if (is_density) return Density::normalized(support, values).to_measure();
  return DiscreteMeasure::normalized(support, values);
}

Density LoadedMeasure::density() const {
  if (is_density) return Density::normalized(support, values);
  return Density::from_measure(DiscreteMeasure::normalized(support, values));
}

LoadedMeasure load_measure_csv(const std::string& path, std::optional<double> bounding_radius) {
  CsvTable t = read_csv(path);
  auto& h = t.header;
  const bool has_volume = !h.empty() && h.back() == "cell_volume";
  const std::size_t value_col = h.size() - (has_volume ? 2 : 1);
  if (h.size() < (has_volume ? 3u : 2u) || (h[value_col] != "weight" && h[value_col] != "density"))
    throw ParseError(path, 1, "header must be x_1..x_d followed by 'weight' or 'density' and optionally 'cell_volume'");
  for (std::size_t k = 0; k < value_col; ++k) {
    if (h[k] != "x_" + std::to_string(k + 1) && h[k] != "x" + std::to_string(k + 1))
      throw ParseError(path, 1, "coordinate column " + std::to_string(k + 1) + " is named '" + h[k] + "'");
  }
  if (t.rows.rows() == 0) throw ParseError(path, 2, "no data rows");

  const auto d = static_cast<Eigen::Index>(value_col);
  RowMat points = t.rows.leftCols(d);
  Vec values = t.rows.col(d);
  Vec volumes;
  if (has_volume) {
    volumes = t.rows.col(d + 1);
  } else {
    double cell = 1.0;
    for (Eigen::Index k = 0; k < d; ++k) {
      std::vector<double> axis(points.rows());
      for (Eigen::Index i = 0; i < points.rows(); ++i) axis[i] = points(i, k);
      std::sort(axis.begin(), axis.end());
      double gap = 0.0;
      for (std::size_t i = 1; i < axis.size(); ++i) {
        const double g = axis[i] - axis[i - 1];
        if (g > 1e-12 * std::max(1.0, std::abs(axis[i])) && (gap == 0.0 || g < gap)) gap = g;
      }
      cell *= gap > 0.0 ? gap : 1.0;
    }
    volumes = Vec::Constant(points.rows(), cell);
  }
  LoadedMeasure out;
  out.is_density = h[value_col] == "density";
  out.values = std::move(values);
  out.support = std::make_shared<const Support>(std::move(points), std::move(volumes), bounding_radius);
  return out;
}

namespace {

void write_point_table(std::ostream& out, const Support& s, const Vec& values, const char* name) {
  for (int k = 0; k < s.dim(); ++k) out << "x_" << k + 1 << ',';
  out << name << ",cell_volume\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (int k = 0; k < s.dim(); ++k) out << format_double(s.points()(i, k)) << ',';
    out << format_double(values[i]) << ',' << format_double(s.cell_volumes()[i]) << '\n';
  }
}

}  // namespace

void write_measure_csv(std::ostream& out, const DiscreteMeasure& m) { write_point_table(out, *m.support, m.weights, "weight"); }

void write_density_csv(std::ostream& out, const Density& p) { write_point_table(out, *p.support, p.values, "density"); }

RowMat load_matrix_csv(const std::string& path) {
  auto in = open(path);
  std::vector<double> values;
  std::string line;
  long lineno = 0;
  std::size_t ncol = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (skip(line)) continue;
    auto cells = split(line);
    if (ncol == 0) ncol = cells.size();
    if (cells.size() != ncol)
      throw ParseError(path, lineno, "expected " + std::to_string(ncol) + " columns, found " + std::to_string(cells.size()));
    for (const auto& c : cells) {
      double v;
      if (!parse_number(c, v)) throw ParseError(path, lineno, "not a finite number: '" + c + "'");
      values.push_back(v);
    }
  }
  if (values.empty()) throw ParseError(path, lineno, "empty matrix");
  return Eigen::Map<RowMat>(values.data(), static_cast<Eigen::Index>(values.size() / ncol), static_cast<Eigen::Index>(ncol));
}

void write_rows(std::ostream& out, const std::vector<std::string>& header, const RowMat& rows) {
  for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
  out << '\n';
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index k = 0; k < rows.cols(); ++k) out << (k ? "," : "") << format_double(rows(i, k));
    out << '\n';
  }
}

}  // namespace sfe::io
