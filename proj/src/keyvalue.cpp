#include "pivotmt/keyvalue.hpp"

#include <charconv>
#include <cmath>

#include "pivotmt/error.hpp"
#include "pivotmt/io.hpp"

namespace pivotmt {

namespace {

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto begin = s.find_first_not_of(ws);
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(ws);
  return s.substr(begin, end - begin + 1);
}

}  // namespace

KeyValues KeyValues::parse(std::string_view text, const std::string& origin) {
  KeyValues kv;
  kv.origin_ = origin;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    const auto line = trim(text.substr(start, end - start));
    start = end + 1;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key=value");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
    if (kv.contains(key))
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": duplicate key '" +
                        std::string(key) + "'");
    kv.entries_.emplace_back(std::string(key), std::string(trim(line.substr(eq + 1))));
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  return parse(io::read_file(path), path.string());
}

void KeyValues::set(std::string key, std::string value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  entries_.emplace_back(std::move(key), std::move(value));
}

bool KeyValues::contains(std::string_view key) const { return get(key).has_value(); }

std::optional<std::string> KeyValues::get(std::string_view key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return v;
  return std::nullopt;
}

const std::string& KeyValues::require(std::string_view key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return v;
  throw ConfigError(origin_ + ": missing key '" + std::string(key) + "'");
}

std::string KeyValues::get_or(std::string_view key, std::string fallback) const {
  auto v = get(key);
  return v ? *v : std::move(fallback);
}

bool parse_bool(std::string_view text, const std::string& what) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError(what + ": expected a boolean, got '" + std::string(text) + "'");
}

bool KeyValues::get_bool(std::string_view key, bool fallback) const {
  auto v = get(key);
  return v ? parse_bool(*v, origin_ + ": " + std::string(key)) : fallback;
}

std::int64_t KeyValues::get_int(std::string_view key) const {
  const auto& v = require(key);
  std::int64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError(origin_ + ": key '" + std::string(key) + "' is not an integer: " + v);
  return out;
}

std::int64_t KeyValues::get_int(std::string_view key, std::int64_t fallback) const {
  return contains(key) ? get_int(key) : fallback;
}

double KeyValues::get_double(std::string_view key) const {
  const auto& v = require(key);
  double out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out))
    throw ConfigError(origin_ + ": key '" + std::string(key) + "' is not a number: " + v);
  return out;
}

double KeyValues::get_double(std::string_view key, double fallback) const {
  return contains(key) ? get_double(key) : fallback;
}

void KeyValues::reject_unknown(const std::set<std::string>& allowed) const {
  for (const auto& [k, v] : entries_)
    if (!allowed.count(k)) throw ConfigError(origin_ + ": unknown key '" + k + "'");
}

std::string KeyValues::to_string() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
  return out;
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

}  // namespace pivotmt
