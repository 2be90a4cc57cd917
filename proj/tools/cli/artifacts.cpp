#include "cli/artifacts.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "sfe/error.hpp"

#ifndef SFE_VERSION
#define SFE_VERSION "unknown"
#endif

namespace sfe::cli {

json to_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(to_json(v[i]));
  return a;
}

json to_json(const RowMat& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(to_json(Vec(m.row(i).transpose())));
  return a;
}

ArtifactWriter::ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw InvalidArgument("cannot create output directory " + dir_.string() + ": " + ec.message());
}

void ArtifactWriter::json_file(const std::string& name, const json& doc) { text_file(name, doc.dump(2) + "\n"); }

void ArtifactWriter::text_file(const std::string& name, const std::string& content) {
  std::ofstream out(dir_ / name, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + (dir_ / name).string());
  out << content;
  written_.push_back(name);
}

void ArtifactWriter::paths_file(const std::string& name, const PathEnsemble& ens) {
  if (!ens.has_paths()) throw InvalidArgument("paths file requested without stored paths");
  std::ofstream out(dir_ / name, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + (dir_ / name).string());
  out.write("HPATHS01", 8);
  const std::uint64_t dims[3] = {ens.n_paths, ens.n_steps + 1, static_cast<std::uint64_t>(ens.dim)};
  out.write(reinterpret_cast<const char*>(dims), sizeof dims);
  out.write(reinterpret_cast<const char*>(ens.paths.data()),
            static_cast<std::streamsize>(ens.paths.size() * sizeof(double)));
  written_.push_back(name);
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string input_hash(const std::string& command, const RunConfig& cfg, const std::vector<std::string>& files) {
  std::string blob = command + '\n';
  for (const auto& [k, v] : cfg.values()) blob += k + '=' + v + '\n';
  for (const auto& f : files) {
    const std::string bytes = read_file(f);
    blob += f + '\0' + std::to_string(bytes.size()) + '\0' + bytes;
  }
  return sha256_hex(blob);
}

void write_manifest(ArtifactWriter& out, const std::string& command, const RunConfig& cfg,
                    const std::vector<std::string>& files, double wall_seconds, int exit_code) {
  json m;
  m["tool"] = "sfe";
  m["version"] = SFE_VERSION;
  m["command"] = command;
  m["parameters"] = cfg.values();
  json inputs = json::array();
  for (const auto& f : files) inputs.push_back({{"path", f}, {"sha256", sha256_hex(read_file(f))}});
  m["input_files"] = inputs;
  m["input_hash"] = input_hash(command, cfg, files);
  m["artifacts"] = out.written();
  m["exit_code"] = exit_code;
  m["wall_time_seconds"] = wall_seconds;
  out.json_file("manifest.json", m);
}

}  // namespace sfe::cli
