#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cli/artifacts.hpp"
#include "cli/config.hpp"
#include "sfe/measure.hpp"
#include "sfe/moment.hpp"
#include "sfe/solver.hpp"

namespace sfe::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitNotConverged = 2;

const std::vector<std::string>& command_names();

// Runs one subcommand on a merged config. Inputs are resolved and
// validated before any solve; the paths of files read are appended to
// `files`. Returns kExitOk or kExitNotConverged and throws on invalid input.
int run_command(const std::string& command, const RunConfig& cfg, ArtifactWriter& out,
                std::vector<std::string>& files);

// Resolved inputs of a control run.
struct ControlSetup {
  Density P0, P1;
  double eps = 0.0;
  SolveOptions solve;
};

ControlSetup control_setup(const RunConfig& cfg, std::vector<std::string>& files);

// Resolved inputs of a moment run; options.grid is the lattice cut to B_r.
struct MomentSetup {
  Density P1;
  double r = 0.0;
  std::vector<double> schedule;
  ContinuationOptions options;
  std::optional<double> threshold;
};

MomentSetup moment_setup(const RunConfig& cfg, std::vector<std::string>& files);

}  // namespace sfe::cli
