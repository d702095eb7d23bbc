#include "amwg/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "amwg/errors.hpp"

namespace amwg {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Drop a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    if (line[k] == '"') quoted = !quoted;
    if (line[k] == '#' && !quoted) return line.substr(0, k);
  }
  return line;
}

[[noreturn]] void field_error(const std::string& key, const std::string& raw, const char* expected) {
  throw ArgumentError("config field '" + key + "': expected " + expected + ", got '" + raw + "'");
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

}  // namespace

ConfigFile ConfigFile::parse(const std::string& text, const std::string& origin) {
  ConfigFile cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || line.front() == '[') {
      throw ArgumentError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ArgumentError(origin + ":" + std::to_string(lineno) + ": empty key or value");
    }
    if (cfg.values_.count(key)) throw ArgumentError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    cfg.values_[key] = value;
  }
  return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

const std::string* ConfigFile::find(const std::string& key) const {
  auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

std::string ConfigFile::get_string(const std::string& key, const std::string& fallback) const {
  const auto* raw = find(key);
  if (!raw) return fallback;
  if (raw->size() < 2 || raw->front() != '"' || raw->back() != '"') field_error(key, *raw, "a quoted string");
  return raw->substr(1, raw->size() - 2);
}

long long ConfigFile::get_int(const std::string& key, long long fallback) const {
  const auto* raw = find(key);
  if (!raw) return fallback;
  long long v = 0;
  if (!parse_number(*raw, v)) field_error(key, *raw, "an integer");
  return v;
}

std::uint64_t ConfigFile::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto* raw = find(key);
  if (!raw) return fallback;
  std::uint64_t v = 0;
  if (!parse_number(*raw, v)) field_error(key, *raw, "an unsigned integer");
  return v;
}

double ConfigFile::get_double(const std::string& key, double fallback) const {
  const auto* raw = find(key);
  if (!raw) return fallback;
  double v = 0.0;
  if (!parse_number(*raw, v)) field_error(key, *raw, "a number");
  return v;
}

bool ConfigFile::get_bool(const std::string& key, bool fallback) const {
  const auto* raw = find(key);
  if (!raw) return fallback;
  if (*raw == "true") return true;
  if (*raw == "false") return false;
  field_error(key, *raw, "true or false");
}

std::vector<int> ConfigFile::get_int_list(const std::string& key, const std::vector<int>& fallback) const {
  const auto* raw = find(key);
  if (!raw) return fallback;
  if (raw->size() < 2 || raw->front() != '[' || raw->back() != ']') field_error(key, *raw, "a list [a, b, ...]");
  std::vector<int> out;
  std::stringstream items(raw->substr(1, raw->size() - 2));
  std::string item;
  while (std::getline(items, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    int v = 0;
    if (!parse_number(item, v)) field_error(key, *raw, "a list of integers");
    out.push_back(v);
  }
  return out;
}

void ConfigFile::reject_unknown(const std::set<std::string>& known) const {
  for (const auto& [key, value] : values_) {
    if (!known.count(key)) throw ArgumentError(origin_ + ": unknown config field '" + key + "'");
  }
}

}  // namespace amwg
