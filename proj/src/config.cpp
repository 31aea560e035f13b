#include "relparcel/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "relparcel/errors.hpp"

namespace relparcel {

namespace {

class ValueParser {
 public:
  ValueParser(const std::string& text, std::string where) : text_(text), where_(std::move(where)) {}

  ConfigValue parse_all() {
    ConfigValue v = parse_value();
    skip_space();
    if (pos_ != text_.size()) fail("trailing characters after value");
    return v;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ConfigError(where_ + ": " + what); }

  void skip_space() {
    while (pos_ < text_.size()) {
      if (std::isspace(static_cast<unsigned char>(text_[pos_]))) {
        ++pos_;
      } else if (text_[pos_] == '#') {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  ConfigValue parse_value() {
    skip_space();
    if (pos_ >= text_.size()) fail("missing value");
    const char c = text_[pos_];
    if (c == '"') return parse_string();
    if (c == '[') return parse_array();
    if (text_.compare(pos_, 4, "true") == 0) {
      pos_ += 4;
      return {true};
    }
    if (text_.compare(pos_, 5, "false") == 0) {
      pos_ += 5;
      return {false};
    }
    return parse_number();
  }

  ConfigValue parse_string() {
    ++pos_;
    std::string out;
    while (pos_ < text_.size() && text_[pos_] != '"') {
      char c = text_[pos_++];
      if (c == '\\' && pos_ < text_.size()) {
        const char e = text_[pos_++];
        c = e == 'n' ? '\n' : e == 't' ? '\t' : e;
      }
      out += c;
    }
    if (pos_ >= text_.size()) fail("unterminated string");
    ++pos_;
    return {out};
  }

  ConfigValue parse_array() {
    ++pos_;
    ConfigValue::Array items;
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == ']') {
      ++pos_;
      return {items};
    }
    while (true) {
      items.push_back(parse_value());
      skip_space();
      if (pos_ >= text_.size()) fail("unterminated array");
      if (text_[pos_] == ',') {
        ++pos_;
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == ']') {
          ++pos_;
          return {items};
        }
        continue;
      }
      if (text_[pos_] == ']') {
        ++pos_;
        return {items};
      }
      fail("expected ',' or ']' in array");
    }
  }

  ConfigValue parse_number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
                                   text_[pos_] == '.' || text_[pos_] == '-' || text_[pos_] == '+' ||
                                   text_[pos_] == '_')) {
      ++pos_;
    }
    std::string token = text_.substr(start, pos_ - start);
    std::erase(token, '_');
    if (token.empty()) fail("unexpected character '" + std::string(1, text_[start]) + "'");
    const bool floating = token.find_first_of(".eE") != std::string::npos &&
                          token.find("0x") == std::string::npos;
    if (!floating) {
      std::int64_t v = 0;
      auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
      if (ec == std::errc() && ptr == token.data() + token.size()) return {v};
    }
    char* end = nullptr;
    const double d = std::strtod(token.c_str(), &end);
    if (end != token.c_str() + token.size()) fail("cannot parse value '" + token + "'");
    return {d};
  }

  const std::string& text_;
  std::string where_;
  std::size_t pos_ = 0;
};

int bracket_balance(const std::string& s) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (c == '\\') ++i;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '#') break;
    if (c == '"') in_string = true;
    else if (c == '[') ++depth;
    else if (c == ']') --depth;
  }
  return depth;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s = buf;
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

}  // namespace

bool ConfigValue::as_bool() const {
  if (const auto* b = std::get_if<bool>(&value)) return *b;
  throw ConfigError("expected a boolean, got " + to_toml());
}

std::int64_t ConfigValue::as_int() const {
  if (const auto* i = std::get_if<std::int64_t>(&value)) return *i;
  throw ConfigError("expected an integer, got " + to_toml());
}

double ConfigValue::as_double() const {
  if (const auto* d = std::get_if<double>(&value)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&value)) return static_cast<double>(*i);
  throw ConfigError("expected a number, got " + to_toml());
}

const std::string& ConfigValue::as_string() const {
  if (const auto* s = std::get_if<std::string>(&value)) return *s;
  throw ConfigError("expected a string, got " + to_toml());
}

const ConfigValue::Array& ConfigValue::as_array() const {
  if (const auto* a = std::get_if<Array>(&value)) return *a;
  throw ConfigError("expected an array, got " + to_toml());
}

std::string ConfigValue::to_toml() const {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, bool>) {
          return v ? "true" : "false";
        } else if constexpr (std::is_same_v<T, std::int64_t>) {
          return std::to_string(v);
        } else if constexpr (std::is_same_v<T, double>) {
          return format_double(v);
        } else if constexpr (std::is_same_v<T, std::string>) {
          std::string out = "\"";
          for (char c : v) {
            if (c == '"' || c == '\\') out += '\\';
            out += c;
          }
          return out + "\"";
        } else {
          std::string out = "[";
          for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) out += ", ";
            out += v[i].to_toml();
          }
          return out + "]";
        }
      },
      value);
}

ConfigDocument ConfigDocument::parse(const std::string& text, const std::string& origin) {
  ConfigDocument doc;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const int start_line = line_no;
    std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    if (stripped[0] == '[' && stripped.find('=') == std::string::npos) {
      const auto close = stripped.find(']');
      if (close == std::string::npos) {
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": unterminated section header");
      }
      section = trim(stripped.substr(1, close - 1));
      if (!doc.sections_.count(section)) {
        doc.section_order_.push_back(section);
        doc.sections_[section];
      }
      continue;
    }
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = trim(stripped.substr(0, eq));
    if (doc.has(section, key)) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    std::string raw = stripped.substr(eq + 1);
    while (bracket_balance(raw) > 0 && std::getline(in, line)) {
      ++line_no;
      raw += "\n" + line;
    }
    ValueParser parser(raw, origin + ":" + std::to_string(start_line));
    doc.set(section, key, parser.parse_all());
  }
  return doc;
}

ConfigDocument ConfigDocument::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

bool ConfigDocument::has(const std::string& section, const std::string& key) const {
  const auto it = sections_.find(section);
  if (it == sections_.end()) return false;
  for (const auto& [k, v] : it->second) {
    if (k == key) return true;
  }
  return false;
}

const ConfigValue& ConfigDocument::get(const std::string& section, const std::string& key) const {
  const auto it = sections_.find(section);
  if (it != sections_.end()) {
    for (const auto& [k, v] : it->second) {
      if (k == key) return v;
    }
  }
  throw ConfigError("missing config key [" + section + "] " + key);
}

bool ConfigDocument::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  return has(section, key) ? get(section, key).as_bool() : fallback;
}

std::int64_t ConfigDocument::get_int(const std::string& section, const std::string& key,
                                     std::int64_t fallback) const {
  return has(section, key) ? get(section, key).as_int() : fallback;
}

double ConfigDocument::get_double(const std::string& section, const std::string& key, double fallback) const {
  return has(section, key) ? get(section, key).as_double() : fallback;
}

std::string ConfigDocument::get_string(const std::string& section, const std::string& key,
                                       const std::string& fallback) const {
  return has(section, key) ? get(section, key).as_string() : fallback;
}

void ConfigDocument::set(const std::string& section, const std::string& key, ConfigValue value) {
  if (!sections_.count(section)) section_order_.push_back(section);
  auto& entries = sections_[section];
  for (auto& [k, v] : entries) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  entries.emplace_back(key, std::move(value));
}

std::vector<std::string> ConfigDocument::sections() const { return section_order_; }

std::vector<std::string> ConfigDocument::keys(const std::string& section) const {
  std::vector<std::string> out;
  const auto it = sections_.find(section);
  if (it != sections_.end()) {
    for (const auto& [k, v] : it->second) out.push_back(k);
  }
  return out;
}

std::string ConfigDocument::dump() const {
  std::string out;
  for (const auto& name : section_order_) {
    const auto& entries = sections_.at(name);
    if (!name.empty()) {
      if (!out.empty()) out += '\n';
      out += "[" + name + "]\n";
    }
    for (const auto& [k, v] : entries) out += k + " = " + v.to_toml() + "\n";
  }
  return out;
}

}  // namespace relparcel
