#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pivotmt {

/// Ordered `key=value` settings as used by rule sets, manifests and
/// checkpoint headers. Blank lines and lines starting with '#' are ignored;
/// whitespace around keys and values is trimmed. Duplicate keys are an error.
class KeyValues {
 public:
  KeyValues() = default;

  static KeyValues parse(std::string_view text, const std::string& origin = "<string>");
  static KeyValues load(const std::filesystem::path& path);

  void set(std::string key, std::string value);
  bool contains(std::string_view key) const;

  std::optional<std::string> get(std::string_view key) const;
  const std::string& require(std::string_view key) const;

  std::string get_or(std::string_view key, std::string fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;
  std::int64_t get_int(std::string_view key) const;
  std::int64_t get_int(std::string_view key, std::int64_t fallback) const;
  double get_double(std::string_view key) const;
  double get_double(std::string_view key, double fallback) const;

  /// Throws ConfigError naming the first key not in `allowed`.
  void reject_unknown(const std::set<std::string>& allowed) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  const std::string& origin() const { return origin_; }

  /// Renders one `key=value` line per entry, in insertion order.
  std::string to_string() const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::string origin_ = "<memory>";
};

bool parse_bool(std::string_view text, const std::string& what);

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

}  // namespace pivotmt
