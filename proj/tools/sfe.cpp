// Command-line front end: sfe <solve|control|bridge|moment|stability> [options]

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cli/artifacts.hpp"
#include "cli/commands.hpp"
#include "cli/config.hpp"
#include "sfe/error.hpp"

namespace {

struct Flags {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> eps, tol, grid;
  bool full_paths = false;
};

std::string command_text(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace sfe::cli;
  CLI::App app{"Schroedinger functional equation toolkit"};
  app.require_subcommand(1);
  Flags flags;
  for (const auto& name : command_names()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", flags.config, "key = value settings file");
    sub->add_option("--out", flags.out, "output directory")->capture_default_str();
    sub->add_option("--seed", flags.seed, "random seed (overrides the config)");
    sub->add_option("--eps", flags.eps, "noise level eps (overrides the config)");
    sub->add_option("--tol", flags.tol, "tolerance (overrides the config)");
    sub->add_option("--grid", flags.grid, "grid as d,r,n (overrides the config)");
    sub->add_flag("--full-paths", flags.full_paths, "bridge: also write every path to paths.bin");
  }
  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  const auto start = std::chrono::steady_clock::now();
  try {
    RunConfig cfg = flags.config.empty() ? RunConfig() : RunConfig::from_file(flags.config);
    if (flags.seed) cfg.set("seed", std::to_string(*flags.seed));
    if (flags.eps) cfg.set("eps", command_text(parse_double(*flags.eps, "--eps")));
    if (flags.tol) cfg.set("tol", command_text(parse_double(*flags.tol, "--tol")));
    if (flags.grid) cfg.set("grid", *flags.grid);
    if (flags.full_paths) cfg.set("full_paths", "true");

    ArtifactWriter out(flags.out);
    std::vector<std::string> files;
    if (!flags.config.empty()) files.push_back(flags.config);
    int code = kExitOk;
    try {
      code = run_command(command, cfg, out, files);
    } catch (const sfe::NotConverged& e) {
      std::cerr << "sfe " << command << ": not converged: " << e.what() << '\n';
      code = kExitNotConverged;
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_manifest(out, command, cfg, files, seconds, code);
    if (code == kExitNotConverged) std::cerr << "sfe " << command << ": finished without convergence\n";
    return code;
  } catch (const sfe::Error& e) {
    std::cerr << "sfe " << command << ": " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "sfe " << command << ": " << e.what() << '\n';
    return kExitInvalid;
  }
}
