#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli/config.hpp"
#include "sfe/hpath.hpp"
#include "sfe/types.hpp"

namespace sfe::cli {

using nlohmann::json;

// Non-finite entries become null.
json to_json(double v);
json to_json(const Vec& v);
json to_json(const RowMat& m);

// Collects the files a command writes so the manifest can list them.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path dir);

  void json_file(const std::string& name, const json& doc);
  // Opens name for writing; the caller streams CSV text into it.
  void text_file(const std::string& name, const std::string& content);
  // "HPATHS01", then uint64 n_paths, n_steps + 1, dim, then float64 values
  // in path-major, time, axis order. Native byte order.
  void paths_file(const std::string& name, const PathEnsemble& ens);

  const std::filesystem::path& dir() const { return dir_; }
  const std::vector<std::string>& written() const { return written_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> written_;
};

std::string sha256_hex(const std::string& bytes);
std::string read_file(const std::string& path);

// SHA-256 over the command, the effective settings and every input file's
// path and bytes.
std::string input_hash(const std::string& command, const RunConfig& cfg, const std::vector<std::string>& files);

// manifest.json: input hash, parameters, tool version and wall time. It is
// the one artifact that differs between identical runs.
void write_manifest(ArtifactWriter& out, const std::string& command, const RunConfig& cfg,
                    const std::vector<std::string>& files, double wall_seconds, int exit_code);

}  // namespace sfe::cli
