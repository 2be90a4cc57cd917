#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace sfe::cli {

// Flat `key = value` settings. Values given on the command line replace the
// file's. Every key must be read by the command, so typos are caught.
class RunConfig {
 public:
  RunConfig() = default;

  static RunConfig from_file(const std::string& path);
  static RunConfig parse(const std::string& text, const std::string& source);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string text(const std::string& key) const;
  std::string text(const std::string& key, const std::string& fallback) const;
  double number(const std::string& key) const;
  double number(const std::string& key, double fallback) const;
  std::optional<double> optional_number(const std::string& key) const;
  long integer(const std::string& key) const;
  long integer(const std::string& key, long fallback) const;
  std::uint64_t seed(const std::string& key) const;
  bool flag(const std::string& key, bool fallback) const;
  std::vector<double> numbers(const std::string& key) const;

  // Resolves a path relative to the directory of the config file.
  std::string path(const std::string& relative) const;

  // Throws when a key was never read.
  void check_all_used() const;

  const std::map<std::string, std::string>& values() const { return values_; }
  const std::string& source() const { return source_; }
  const std::string& base_dir() const { return base_dir_; }

 private:
  const std::string& raw(const std::string& key) const;

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
  std::string source_ = "<command line>";
  std::string base_dir_ = ".";
};

// Splits on commas and trims each field.
std::vector<std::string> split_list(const std::string& text);
double parse_double(const std::string& text, const std::string& what);

}  // namespace sfe::cli
