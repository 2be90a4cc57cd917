#pragma once

#include <string>
#include <vector>

#include "cli/config.hpp"
#include "sfe/measure.hpp"
#include "sfe/support.hpp"

namespace sfe::cli {

struct GridSpec {
  int dim = 1;
  double radius = 1.0;
  int points_per_axis = 2;
};

// "d,r,n"
GridSpec parse_grid(const std::string& text);

// A measure read from a CSV file or generated on the run's grid.
struct InputMeasure {
  SupportPtr support;
  Vec values;
  bool is_density = true;

  DiscreteMeasure measure() const;
  Density density() const;
};

// Reads files (relative to the config) from their CSV schema; otherwise one
// of the generators normal(mean,var), mixture(offset,var) or uniform on
// `grid`. Paths of every file read are appended to `files`.
InputMeasure resolve_measure(const RunConfig& cfg, const std::string& key, const SupportPtr& grid,
                             std::vector<std::string>& files);

}  // namespace sfe::cli
