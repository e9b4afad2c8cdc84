#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "phame/core/error.hpp"
#include "phame/core/io.hpp"

namespace phame::eval {

/// A metric value with its denominator. An absent value (empty input, no
/// survivors) carries a note saying why.
struct MetricValue {
  std::optional<double> value;
  std::size_t count = 0;
  std::string note;

  static MetricValue of(double v, std::size_t n, std::string note = {}) { return {v, n, std::move(note)}; }
  static MetricValue absent(std::size_t n, std::string why) { return {std::nullopt, n, std::move(why)}; }

  bool present() const { return value.has_value(); }
  double operator*() const {
    if (!value) throw Error(ErrorCode::Data, "metric is absent: " + note);
    return *value;
  }

  friend bool operator==(const MetricValue&, const MetricValue&) = default;
};

/// Ratio with an explicit denominator; absent when the denominator is zero.
inline MetricValue ratio(std::size_t num, std::size_t den, std::string note = {}) {
  if (den == 0) return MetricValue::absent(0, note.empty() ? "empty denominator" : note + "; empty denominator");
  return MetricValue::of(static_cast<double>(num) / static_cast<double>(den), den, std::move(note));
}

class MetricsReport {
 public:
  struct Entry {
    std::string name;
    MetricValue metric;
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  void set(const std::string& name, MetricValue m) {
    for (auto& e : entries_) {
      if (e.name == name) {
        e.metric = std::move(m);
        return;
      }
    }
    entries_.push_back({name, std::move(m)});
  }

  const MetricValue& get(const std::string& name) const {
    for (const auto& e : entries_)
      if (e.name == name) return e.metric;
    throw Error(ErrorCode::Data, "report has no metric '" + name + "'");
  }

  bool contains(const std::string& name) const {
    return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.name == name; });
  }

  const std::vector<Entry>& entries() const { return entries_; }

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : entries_) {
      nlohmann::json j{{"name", e.name}, {"count", e.metric.count}};
      j["value"] = e.metric.value ? nlohmann::json(*e.metric.value) : nlohmann::json(nullptr);
      if (!e.metric.note.empty()) j["note"] = e.metric.note;
      arr.push_back(std::move(j));
    }
    return {{"metrics", arr}};
  }

  static MetricsReport from_json(const nlohmann::json& j) {
    MetricsReport r;
    try {
      for (const auto& m : j.at("metrics")) {
        MetricValue v;
        v.count = m.at("count").get<std::size_t>();
        if (!m.at("value").is_null()) v.value = m.at("value").get<double>();
        if (m.contains("note")) v.note = m.at("note").get<std::string>();
        r.set(m.at("name").get<std::string>(), std::move(v));
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Data, std::string("malformed metrics report: ") + e.what());
    }
    return r;
  }

  /// Aligned columns: name, value, denominator, note.
  std::string to_text() const {
    std::size_t w = 6;
    for (const auto& e : entries_) w = std::max(w, e.name.size());
    std::string out;
    auto row = [&](const std::string& a, const std::string& b, const std::string& c, const std::string& d) {
      std::string line = a + std::string(w - a.size() + 2, ' ');
      line += std::string(b.size() < 12 ? 12 - b.size() : 0, ' ') + b;
      line += std::string(c.size() < 8 ? 8 - c.size() : 0, ' ') + c;
      if (!d.empty()) line += "  " + d;
      out += line + '\n';
    };
    row("metric", "value", "n", "note");
    for (const auto& e : entries_) {
      std::string v = "absent";
      if (e.metric.value) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6f", *e.metric.value);
        v = buf;
      }
      row(e.name, v, std::to_string(e.metric.count), e.metric.note);
    }
    return out;
  }

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;

 private:
  std::vector<Entry> entries_;
};

}  // namespace phame::eval
