#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "phame/core/error.hpp"
#include "phame/core/io.hpp"

namespace phame::app {

enum class ValueType { String, Int, UInt, Real, Bool, Choice, IntList, UIntList, RealList, StringList };

struct KeySpec {
  std::string name;  // "section.key"
  ValueType type;
  /// Default as config text; nullopt means the key is optional with no value.
  std::optional<std::string> default_value;
  std::vector<std::string> choices;
  std::string help;
};

class Schema {
 public:
  Schema& add(std::string name, ValueType type, std::optional<std::string> def, std::string help,
              std::vector<std::string> choices = {}) {
    specs_.push_back({std::move(name), type, std::move(def), std::move(choices), std::move(help)});
    return *this;
  }

  const KeySpec* find(std::string_view name) const {
    for (const auto& s : specs_)
      if (s.name == name) return &s;
    return nullptr;
  }

  bool has_section(std::string_view section) const {
    return std::any_of(specs_.begin(), specs_.end(), [&](const KeySpec& s) {
      return s.name.size() > section.size() && s.name.compare(0, section.size(), section) == 0 &&
             s.name[section.size()] == '.';
    });
  }

  const std::vector<KeySpec>& specs() const { return specs_; }

 private:
  std::vector<KeySpec> specs_;
};

namespace detail {

inline std::optional<long long> parse_int(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::size_t pos = 0;
  try {
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

inline std::vector<std::string> list_items(const std::string& s) {
  std::vector<std::string> out;
  if (io::trim(s).empty()) return out;
  for (const auto& part : io::split(s, ',')) out.push_back(io::trim(part));
  return out;
}

/// Empty string when the value fits the type, otherwise the reason.
inline std::string type_error(const KeySpec& spec, const std::string& v) {
  auto each = [&](auto&& ok) -> std::string {
    for (const auto& item : list_items(v))
      if (!ok(item)) return "list item '" + item + "' is not valid";
    return {};
  };
  switch (spec.type) {
    case ValueType::String: return {};
    case ValueType::Int: return parse_int(v) ? "" : "expected an integer";
    case ValueType::UInt: return parse_int(v) && *parse_int(v) >= 0 ? "" : "expected a nonnegative integer";
    case ValueType::Real: return io::parse_real(v) ? "" : "expected a number";
    case ValueType::Bool: return v == "true" || v == "false" ? "" : "expected true or false";
    case ValueType::Choice:
      if (std::find(spec.choices.begin(), spec.choices.end(), v) != spec.choices.end()) return {};
      {
        std::string all;
        for (const auto& c : spec.choices) all += (all.empty() ? "" : ", ") + c;
        return "expected one of " + all;
      }
    case ValueType::IntList: return each([](const std::string& x) { return parse_int(x).has_value(); });
    case ValueType::UIntList:
      return each([](const std::string& x) { return parse_int(x).has_value() && *parse_int(x) >= 0; });
    case ValueType::RealList: return each([](const std::string& x) { return io::parse_real(x).has_value(); });
    case ValueType::StringList: return each([](const std::string& x) { return !x.empty(); });
  }
  return {};
}

}  // namespace detail

/// Sectioned "key = value" configuration checked against a schema. Every
/// unknown key and every ill-typed value is rejected at parse time.
class Config {
 public:
  explicit Config(const Schema& schema) : schema_(&schema) {}

  static Config parse(std::string_view text, const Schema& schema) {
    Config cfg(schema);
    std::string section;
    int lineno = 0;
    for (const auto& raw : io::lines(text)) {
      ++lineno;
      const std::string line = io::trim(raw);
      if (line.empty() || line[0] == '#' || line[0] == ';') continue;
      auto fail = [&](const std::string& why) {
        return Error(ErrorCode::Config, "config line " + std::to_string(lineno) + ": " + why);
      };
      if (line.front() == '[') {
        if (line.back() != ']') throw fail("unterminated section header");
        section = io::trim(std::string_view(line).substr(1, line.size() - 2));
        if (!schema.has_section(section)) throw fail("unknown section [" + section + "]");
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw fail("expected key = value");
      if (section.empty()) throw fail("key outside of any section");
      const std::string key = section + "." + io::trim(std::string_view(line).substr(0, eq));
      const std::string value = io::trim(std::string_view(line).substr(eq + 1));
      if (cfg.values_.contains(key)) throw fail("duplicate key " + key);
      try {
        cfg.set(key, value);
      } catch (const Error& e) {
        throw fail(e.what());
      }
    }
    return cfg;
  }

  /// Sets a key after checking the schema; throws Config on any problem.
  void set(const std::string& key, const std::string& value) {
    const KeySpec* spec = schema_->find(key);
    if (!spec) throw Error(ErrorCode::Config, "unknown key " + key);
    if (const auto why = detail::type_error(*spec, value); !why.empty()) {
      throw Error(ErrorCode::Config, key + " = '" + value + "': " + why);
    }
    values_[key] = value;
  }

  bool has(const std::string& key) const { return raw(key).has_value(); }

  std::optional<std::string> raw(const std::string& key) const {
    const KeySpec* spec = require(key);
    if (const auto it = values_.find(key); it != values_.end()) return it->second;
    return spec->default_value;
  }

  std::string str(const std::string& key) const { return value(key); }
  long long integer(const std::string& key) const { return *detail::parse_int(value(key)); }
  double real(const std::string& key) const { return *io::parse_real(value(key)); }
  bool boolean(const std::string& key) const { return value(key) == "true"; }

  std::optional<double> opt_real(const std::string& key) const {
    const auto v = raw(key);
    if (!v || v->empty()) return std::nullopt;
    return *io::parse_real(*v);
  }
  std::optional<long long> opt_integer(const std::string& key) const {
    const auto v = raw(key);
    if (!v || v->empty()) return std::nullopt;
    return *detail::parse_int(*v);
  }

  std::vector<double> reals(const std::string& key) const {
    std::vector<double> out;
    for (const auto& s : detail::list_items(raw(key).value_or(""))) out.push_back(*io::parse_real(s));
    return out;
  }
  std::vector<long long> integers(const std::string& key) const {
    std::vector<long long> out;
    for (const auto& s : detail::list_items(raw(key).value_or(""))) out.push_back(*detail::parse_int(s));
    return out;
  }
  std::vector<std::string> strings(const std::string& key) const { return detail::list_items(raw(key).value_or("")); }

  /// Every schema key with its effective value, grouped by section. Unset
  /// optional keys appear commented out.
  std::string resolved_text() const {
    std::string out;
    std::string section;
    for (const auto& spec : schema_->specs()) {
      const auto dot = spec.name.find('.');
      const std::string sec = spec.name.substr(0, dot);
      if (sec != section) {
        out += (out.empty() ? "[" : "\n[") + sec + "]\n";
        section = sec;
      }
      const auto v = raw(spec.name);
      const std::string key = spec.name.substr(dot + 1);
      out += v ? key + " = " + *v + "\n" : "# " + key + " =\n";
    }
    return out;
  }

 private:
  const KeySpec* require(const std::string& key) const {
    const KeySpec* spec = schema_->find(key);
    if (!spec) throw Error(ErrorCode::Config, "unknown key " + key);
    return spec;
  }

  std::string value(const std::string& key) const {
    const auto v = raw(key);
    if (!v) throw Error(ErrorCode::Config, "missing required key " + key);
    return *v;
  }

  const Schema* schema_;
  std::map<std::string, std::string> values_;
};

}  // namespace phame::app
