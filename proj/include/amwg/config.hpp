#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace amwg {

// Flat `key = value` files, a subset of TOML: comments start with '#',
// strings are double quoted, lists are [a, b, c]. No tables.
class ConfigFile {
 public:
  static ConfigFile parse(const std::string& text, const std::string& origin = "<string>");
  static ConfigFile load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, const std::string& raw) { values_[key] = raw; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;

  // Throws if a key outside `known` is present.
  void reject_unknown(const std::set<std::string>& known) const;

  const std::map<std::string, std::string>& raw() const { return values_; }

 private:
  const std::string* find(const std::string& key) const;
  std::string origin_;
  std::map<std::string, std::string> values_;
};

}  // namespace amwg
