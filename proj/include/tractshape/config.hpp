#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tractshape {

// Flat `key = value` configuration text. Lines starting with '#' (after
// leading blanks) and empty lines are ignored; keys are case-sensitive.
class FlatConfig {
 public:
  static FlatConfig parse(std::string_view text);
  static FlatConfig load(const std::string& path);

  bool has(const std::string& key) const;
  const std::string& require(const std::string& key) const;
  std::optional<std::string> find(const std::string& key) const;

  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  double require_double(const std::string& key) const;
  long long get_int(const std::string& key, long long fallback) const;
  long long require_int(const std::string& key) const;
  std::uint64_t require_seed() const;  // `seed` key, mandatory by policy
  bool get_bool(const std::string& key, bool fallback) const;

  // Comma- or semicolon-separated list values, trimmed.
  std::vector<std::string> get_list(const std::string& key, char sep) const;

  const std::map<std::string, std::string>& values() const { return values_; }

  void set(const std::string& key, const std::string& value) {
    values_[key] = value;
  }

 private:
  std::map<std::string, std::string> values_;
};

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

}  // namespace tractshape
