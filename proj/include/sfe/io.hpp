#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sfe/measure.hpp"
#include "sfe/types.hpp"

namespace sfe::io {

// Shortest text that reads back to the same double: "%.17g".
std::string format_double(double v);

// Numeric CSV with a mandatory header row. Blank lines and lines starting
// with '#' are skipped; every other row must have one number per column.
struct CsvTable {
  std::vector<std::string> header;
  RowMat rows;
};
CsvTable read_csv(const std::string& path);
CsvTable parse_csv(std::istream& in, const std::string& source);

// Measure files: columns x_1..x_d then `weight` or `density`, optionally
// followed by `cell_volume`. Without that column cell volumes are the
// product of the smallest positive coordinate gaps per axis, which is the
// lattice cell for grid-based files.
struct LoadedMeasure {
  SupportPtr support;
  Vec values;
  bool is_density = false;

  DiscreteMeasure measure() const;
  Density density() const;
};
LoadedMeasure load_measure_csv(const std::string& path, std::optional<double> bounding_radius = std::nullopt);

void write_measure_csv(std::ostream& out, const DiscreteMeasure& m);
void write_density_csv(std::ostream& out, const Density& p);

// Plain numeric matrix, one row per line, no header. Used for dense kernels.
RowMat load_matrix_csv(const std::string& path);

// Writes `header` then each row with format_double.
void write_rows(std::ostream& out, const std::vector<std::string>& header, const RowMat& rows);

}  // namespace sfe::io
