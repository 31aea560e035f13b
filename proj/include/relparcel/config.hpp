#ifndef RELPARCEL_CONFIG_HPP
#define RELPARCEL_CONFIG_HPP

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace relparcel {

/*
 Small reader/writer for the TOML subset used by run configs and recipes:
 [section] headers, `key = value` pairs, '#' comments, and values that are
 strings, booleans, integers, floats or (possibly nested, possibly
 multi-line) arrays of those.
*/
struct ConfigValue {
  using Array = std::vector<ConfigValue>;
  std::variant<bool, std::int64_t, double, std::string, Array> value;

  bool is_array() const { return std::holds_alternative<Array>(value); }
  bool as_bool() const;
  std::int64_t as_int() const;
  double as_double() const;
  const std::string& as_string() const;
  const Array& as_array() const;

  std::string to_toml() const;
};

class ConfigDocument {
 public:
  static ConfigDocument parse(const std::string& text, const std::string& origin = "<config>");
  static ConfigDocument load(const std::string& path);

  bool has(const std::string& section, const std::string& key) const;
  const ConfigValue& get(const std::string& section, const std::string& key) const;

  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  std::int64_t get_int(const std::string& section, const std::string& key, std::int64_t fallback) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  std::string get_string(const std::string& section, const std::string& key, const std::string& fallback) const;

  void set(const std::string& section, const std::string& key, ConfigValue value);
  std::vector<std::string> sections() const;
  std::vector<std::string> keys(const std::string& section) const;

  /// Sections and keys in insertion order.
  std::string dump() const;

 private:
  std::vector<std::string> section_order_;
  std::map<std::string, std::vector<std::pair<std::string, ConfigValue>>> sections_;
};

}  // namespace relparcel

#endif  // RELPARCEL_CONFIG_HPP
