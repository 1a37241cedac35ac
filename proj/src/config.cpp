#include "tractshape/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "tractshape/error.hpp"

namespace tractshape {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      std::string piece = trim(s.substr(start, i - start));
      if (!piece.empty()) out.push_back(std::move(piece));
      start = i + 1;
    }
  }
  return out;
}

FlatConfig FlatConfig::parse(std::string_view text) {
  FlatConfig cfg;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? text.size() - pos
                                                      : nl - pos);
    ++line_no;
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;

    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      fail(Errc::config_error,
           "line " + std::to_string(line_no) + ": expected `key = value`");
    const std::string key = trim(std::string_view(stripped).substr(0, eq));
    const std::string value = trim(std::string_view(stripped).substr(eq + 1));
    if (key.empty())
      fail(Errc::config_error,
           "line " + std::to_string(line_no) + ": empty key");
    if (cfg.values_.count(key))
      fail(Errc::config_error, "duplicate key `" + key + "`");
    cfg.values_[key] = value;
  }
  return cfg;
}

FlatConfig FlatConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io_error, "cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

bool FlatConfig::has(const std::string& key) const {
  return values_.count(key) != 0;
}

const std::string& FlatConfig::require(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end())
    fail(Errc::config_error, "missing required key `" + key + "`");
  return it->second;
}

std::optional<std::string> FlatConfig::find(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string FlatConfig::get_string(const std::string& key,
                                   const std::string& fallback) const {
  auto v = find(key);
  return v ? *v : fallback;
}

namespace {

double parse_double_or_fail(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    fail(Errc::config_error, "key `" + key + "`: not a number: " + text);
  }
}

long long parse_int_or_fail(const std::string& key, const std::string& text) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    fail(Errc::config_error, "key `" + key + "`: not an integer: " + text);
  return v;
}

}  // namespace

double FlatConfig::get_double(const std::string& key, double fallback) const {
  auto v = find(key);
  return v ? parse_double_or_fail(key, *v) : fallback;
}

double FlatConfig::require_double(const std::string& key) const {
  return parse_double_or_fail(key, require(key));
}

long long FlatConfig::get_int(const std::string& key, long long fallback) const {
  auto v = find(key);
  return v ? parse_int_or_fail(key, *v) : fallback;
}

long long FlatConfig::require_int(const std::string& key) const {
  return parse_int_or_fail(key, require(key));
}

std::uint64_t FlatConfig::require_seed() const {
  const long long v = require_int("seed");
  if (v < 0) fail(Errc::config_error, "seed must be non-negative");
  return static_cast<std::uint64_t>(v);
}

bool FlatConfig::get_bool(const std::string& key, bool fallback) const {
  auto v = find(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  fail(Errc::config_error, "key `" + key + "`: not a boolean: " + *v);
}

std::vector<std::string> FlatConfig::get_list(const std::string& key,
                                              char sep) const {
  auto v = find(key);
  if (!v) return {};
  return split(*v, sep);
}

}  // namespace tractshape
