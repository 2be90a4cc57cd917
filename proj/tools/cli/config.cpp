#include "cli/config.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sfe/error.hpp"

namespace sfe::cli {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(text);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  return out;
}

double parse_double(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  double v = 0.0;
  const char* first = t.data();
  if (!t.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v))
    throw InvalidArgument(what + ": '" + text + "' is not a finite number");
  return v;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  RunConfig cfg = parse(buf.str(), path);
  cfg.base_dir_ = std::filesystem::path(path).parent_path().string();
  if (cfg.base_dir_.empty()) cfg.base_dir_ = ".";
  return cfg;
}

RunConfig RunConfig::parse(const std::string& text, const std::string& source) {
  RunConfig cfg;
  cfg.source_ = source;
  std::istringstream in(text);
  std::string line;
  long number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError(source, number, "expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw ParseError(source, number, "empty key");
    if (cfg.values_.count(key)) throw ParseError(source, number, "duplicate key '" + key + "'");
    cfg.values_[key] = value;
  }
  return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) { values_[key] = value; }

const std::string& RunConfig::raw(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw InvalidArgument(source_ + ": missing required key '" + key + "'");
  used_.insert(key);
  return it->second;
}

std::string RunConfig::text(const std::string& key) const { return raw(key); }

std::string RunConfig::text(const std::string& key, const std::string& fallback) const {
  return has(key) ? raw(key) : fallback;
}

double RunConfig::number(const std::string& key) const { return parse_double(raw(key), source_ + ": " + key); }

double RunConfig::number(const std::string& key, double fallback) const {
  return has(key) ? number(key) : fallback;
}

std::optional<double> RunConfig::optional_number(const std::string& key) const {
  if (!has(key)) return std::nullopt;
  return number(key);
}

long RunConfig::integer(const std::string& key) const {
  const std::string& v = raw(key);
  long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size())
    throw InvalidArgument(source_ + ": " + key + " = '" + v + "' is not an integer");
  return out;
}

long RunConfig::integer(const std::string& key, long fallback) const { return has(key) ? integer(key) : fallback; }

std::uint64_t RunConfig::seed(const std::string& key) const {
  const std::string& v = raw(key);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size())
    throw InvalidArgument(source_ + ": " + key + " = '" + v + "' is not an unsigned integer");
  return out;
}

bool RunConfig::flag(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string& v = raw(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InvalidArgument(source_ + ": " + key + " = '" + v + "' is not a boolean");
}

std::vector<double> RunConfig::numbers(const std::string& key) const {
  std::vector<double> out;
  for (const auto& f : split_list(raw(key))) out.push_back(parse_double(f, source_ + ": " + key));
  return out;
}

std::string RunConfig::path(const std::string& relative) const {
  const std::filesystem::path p(relative);
  if (p.is_absolute()) return p.string();
  return (std::filesystem::path(base_dir_) / p).lexically_normal().string();
}

void RunConfig::check_all_used() const {
  for (const auto& [key, value] : values_) {
    if (!used_.count(key)) throw InvalidArgument(source_ + ": unknown key '" + key + "' for this command");
  }
}

}  // namespace sfe::cli
